#pragma once

#include "mflq/compensator.hpp"
#include "mflq/problem.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mflq {

/// Named reference functions of time with a note on what each encodes.
class ClosedFormBundle {
public:
    using Fn = std::function<Matrix(double)>;

    void add(const std::string& name, const std::string& source, Fn f);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Matrix operator()(const std::string& name, double t) const;
    double scalar(const std::string& name, double t) const { return (*this)(name, t)(0, 0); }
    const std::string& source(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    struct Entry {
        std::string source;
        Fn f;
    };
    std::map<std::string, Entry> entries_;
};

/// Bond rate r, stock drifts mu and volatility sigma; the excess-return
/// direction is b = sigma^{-1}(mu - r 1).
struct MarketModel {
    int assets = 1;
    TimeFunctionMatrix r;      // 1 x 1
    TimeFunctionMatrix mu;     // assets x 1
    TimeFunctionMatrix sigma;  // assets x assets
    double delta = 1e-6;       // required lower bound of sigma sigma'

    static MarketModel constant(double r, const Vector& mu, const Matrix& sigma, double delta = 1e-6);
    Vector b(double t) const;
    bool is_constant() const { return r.is_constant() && mu.is_constant() && sigma.is_constant(); }
};

/// J = (nu/2) Var X(T) - E X(T) as n = 1, m = d = assets, A = r, B = b', D_j = e_j',
/// G = nu/2, Gtilde = -nu/2, ell = -1/2. Time-varying markets are sampled on `sampling`.
ProblemSpec build_mean_variance(const MarketModel& market, double nu, double T, double x0,
                                const TimeGrid* sampling = nullptr);

/// P, Phat, phi, gain (m x 1) and offset (m x 1).
ClosedFormBundle mv_closed_forms(const MarketModel& market, double nu, double T);

/// Scalar state, drift a X + atilde EX + b u + btilde Eu, diffusion u;
/// cost alpha |X - EX|^2 - beta u^2 and gamma X(T)^2, with the mean block weighted by alpha as well.
struct SpeedParams {
    double a = 0.8;
    double atilde = 0.6;
    double b = 0.4;
    double btilde = 0.1;
    double alpha = 0.5;
    double beta = 0.2;
    double gamma = 1.0;
    double T = 1.0;
    double x0 = 1.0;
};

struct SpeedExample {
    ProblemSpec spec;
    /// Standing assumptions that do not hold for these parameters.
    std::vector<std::string> warnings;
};

SpeedExample build_speed_example(const SpeedParams& p);

/// H = gamma and K(t) = 1 / [ (1/gamma) e^{-2 ahat (T-t)} + int_t^T bhat^2/(gamma-beta) e^{-2 ahat (s-t)} ds ],
/// with Kdot = -2 ahat K + bhat^2/(gamma-beta) K^2 sampled on `samples` intervals and K anchored at K(T) = gamma.
/// Throws DomainError when gamma <= beta.
CompensatorPair speed_compensator(const SpeedParams& p, int samples = 4000);

/// Exact K(t) of the compensator formula.
double speed_K_exact(const SpeedParams& p, double t);

/// Feedback form: u = -[b P (x - xbar) + bhat Phat xbar] / (P - beta).
double speed_closed_loop_control(const SpeedParams& p, double P, double Phat, double x, double xbar);
/// Adjoint form: u = [b Y + btilde EY + Z] / beta (beta != 0).
double speed_open_loop_control(const SpeedParams& p, double Y, double Ybar, double Z);

/// Scalar state, drift alpha X + atilde EX, diffusion beta u; cost gamma X^2 + gammatilde (EX)^2 - theta u^2
/// and G X(T)^2.
struct NegDefParams {
    double alpha = 0.1;
    double atilde = 0.2;
    double beta = 1.0;
    double gamma = 0.5;
    double gammatilde = 0.3;
    double theta = 0.2;
    double G = 1.0;
    double T = 1.0;
    double x0 = 1.0;
};

/// Throws DomainError unless theta > 0, and ThetaBoundViolated when theta >= beta^2 P(t)
/// at some node of `check` (default: 2000 steps).
ProblemSpec build_negdef_example(const NegDefParams& p, const TimeGrid* check = nullptr);

/// P(t) = G e^{2 alpha (T-t)} + gamma int_t^T e^{2 alpha (s-t)} ds, Phat likewise with
/// (alpha + atilde, gamma + gammatilde); mean = X = x0 e^{(alpha+atilde) t}; Y = Phat X; Z = 0;
/// control = 0 (both feedback and adjoint forms).
ClosedFormBundle negdef_closed_forms(const NegDefParams& p);

/// int_a^b f by adaptive Gauss-Kronrod on each piece between consecutive breakpoints.
double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                           const std::vector<double>& breakpoints);

}  // namespace mflq
