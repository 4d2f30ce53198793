#pragma once

#include "mflq/problem.hpp"
#include "mflq/riccati.hpp"

#include <vector>

namespace mflq {

struct FeedbackLaw;

/// Absolutely continuous symmetric function F(t) = F0 + int_0^t fdot(s) ds,
/// with fdot piecewise linear (or constant), so F is integrated exactly.
class LambdaFunction {
public:
    LambdaFunction() = default;
    LambdaFunction(SymMatrix F0, TimeFunctionMatrix fdot);

    static LambdaFunction zero(int n);
    static LambdaFunction constant(const SymMatrix& value);

    int dim() const { return static_cast<int>(F0_.dim()); }
    const SymMatrix& F0() const { return F0_; }
    const TimeFunctionMatrix& fdot() const { return fdot_; }

    SymMatrix value(double t) const;
    SymMatrix derivative(double t) const;

    LambdaFunction operator-() const;
    friend LambdaFunction operator+(const LambdaFunction& a, const LambdaFunction& b);

private:
    SymMatrix F0_;
    TimeFunctionMatrix fdot_;
    /// F at every fdot sample node (cumulative trapezoid, exact for linear pieces).
    std::vector<Matrix> cumulative_;
};

struct CompensatorPair {
    LambdaFunction H;
    LambdaFunction K;

    static CompensatorPair zero(int n) { return {LambdaFunction::zero(n), LambdaFunction::zero(n)}; }
    CompensatorPair operator-() const { return {-H, -K}; }
};

struct ShiftedQuadruple {
    SymMatrix Q, Qhat;
    Matrix S, Shat;
    SymMatrix R, Rhat;
    SymMatrix G, Ghat;
};

/// The shifted weights at t:
///   Q^{HK} = Hdot + HA + A'H + sum_j C_j'HC_j + Q,  S^{HK} = HB + sum_j C_j'HD_j + S,
///   R^{HK} = sum_j D_j'HD_j + R,  G^{HK} = G - H(T),
/// and the hatted ones with (K, Ahat, Bhat, Chat, Dhat) where Chat/Dhat still meet H.
ShiftedQuadruple shifted_quadruple(const ProblemSpec& spec, const CompensatorPair& comp, double t);
ShiftedQuadruple shifted_quadruple(const PointCoefficients& pc, const ProblemSpec& spec, const CompensatorPair& comp);

/// Same dynamics, weights replaced by the shifted quadruple (stored back in tilde form).
/// Time-varying weights are sampled on `sampling`; choose a grid whose nodes contain
/// every point where the result will be evaluated (RK4 half-steps of a solver grid).
ProblemSpec shifted_problem(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& sampling);
/// Samples on twice the default solver grid.
ProblemSpec shifted_problem(const ProblemSpec& spec, const CompensatorPair& comp);

/// Grid used by shifted_problem when none is given.
TimeGrid default_shift_sampling(double T);

struct RCGroupReport {
    bool inequality_ok = false;   // Riccati-type inequality (Schur complement) >= -tol
    bool terminal_ok = false;     // terminal weight minus compensator(T) >= -tol
    bool denominator_ok = false;  // gain denominator - delta I >= 0
    double inequality_min = 0.0;
    double inequality_worst_t = 0.0;
    double terminal_min = 0.0;
    double denominator_min = 0.0;
    double denominator_worst_t = 0.0;

    bool pass() const { return inequality_ok && terminal_ok && denominator_ok; }
};

struct RCReport {
    RCGroupReport deviation;  // group (i), on H
    RCGroupReport mean;       // group (ii), on K

    bool pass() const { return deviation.pass() && mean.pass(); }
};

/// Evaluates both inequality groups at every node. Where a denominator's
/// smallest eigenvalue is at or below margin_floor the complement is not formed
/// and the inequality clause is reported as failed.
RCReport check_condition_rc(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid,
                            double delta = kUniformDelta, double tol = kPsdTol);

struct RCPDEquivalence {
    bool rc = false;
    bool pd_shifted = false;
};

RCPDEquivalence rc_pd_equivalence(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid,
                                  double delta = kUniformDelta, double tol = kPsdTol);

struct CostShift {
    double J = 0.0;
    double J_hk = 0.0;
    double K0_term = 0.0;
    /// J_hk - J + K0_term
    double defect() const { return J_hk - J + K0_term; }
};

/// Both costs by the moment oracle on `grid`; the shifted problem is sampled at its half-steps.
CostShift cost_shift_check(const ProblemSpec& spec, const CompensatorPair& comp, const FeedbackLaw& law,
                           const TimeGrid& grid);

struct TransformErrors {
    double P = 0.0;
    double Phat = 0.0;
};

/// Solves the Riccati system on spec and on the shifted problem and compares
/// P_shifted with P - H and Phat_shifted with Phat - K at every node.
TransformErrors riccati_transform_check(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid);

}  // namespace mflq
