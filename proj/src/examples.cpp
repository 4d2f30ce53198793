#include "mflq/examples.hpp"

#include "mflq/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mflq {

void ClosedFormBundle::add(const std::string& name, const std::string& source, Fn f) {
    entries_[name] = Entry{source, std::move(f)};
}

Matrix ClosedFormBundle::operator()(const std::string& name, double t) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DomainError("closed form '" + name + "' not available");
    return it->second.f(t);
}

const std::string& ClosedFormBundle::source(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DomainError("closed form '" + name + "' not available");
    return it->second.source;
}

std::vector<std::string> ClosedFormBundle::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

double integrate_piecewise(const std::function<double(double)>& f, double a, double b,
                           const std::vector<double>& breakpoints) {
    if (b <= a) return 0.0;
    std::vector<double> cuts{a};
    for (double c : breakpoints) {
        if (c > a && c < b) cuts.push_back(c);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] <= cuts[i]) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cuts[i], cuts[i + 1], 10, 1e-14);
    }
    return total;
}

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TimeFunctionMatrix cst(double v) { return scalar_function(v); }

std::vector<double> merged_breakpoints(const MarketModel& mk, double T) {
    std::vector<double> out;
    for (const auto* f : {&mk.r, &mk.mu, &mk.sigma}) {
        auto b = f->breakpoints(T);
        out.insert(out.end(), b.begin(), b.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void check_market_shapes(const MarketModel& mk) {
    const auto m = static_cast<Eigen::Index>(mk.assets);
    if (mk.assets < 1) throw DomainError("market: at least one asset required");
    if (mk.r.rows() != 1 || mk.r.cols() != 1) throw InvalidMatrix("market: r must be 1x1");
    if (mk.mu.rows() != m || mk.mu.cols() != 1) throw InvalidMatrix("market: mu must be assets x 1");
    if (mk.sigma.rows() != m || mk.sigma.cols() != m) throw InvalidMatrix("market: sigma must be assets x assets");
}

void check_volatility(const MarketModel& mk, double t) {
    const Matrix s = mk.sigma(t);
    const Matrix M = s * s.transpose() - mk.delta * Matrix::Identity(s.rows(), s.cols());
    const double margin = min_eigenvalue(SymMatrix(M));
    if (margin < 0.0) throw DegenerateVolatility(t, margin);
}

}  // namespace

MarketModel MarketModel::constant(double r, const Vector& mu, const Matrix& sigma, double delta) {
    MarketModel mk;
    mk.assets = static_cast<int>(mu.size());
    mk.r = scalar_function(r);
    mk.mu = TimeFunctionMatrix::constant(mu);
    mk.sigma = TimeFunctionMatrix::constant(sigma);
    mk.delta = delta;
    return mk;
}

Vector MarketModel::b(double t) const {
    const Matrix s = sigma(t);
    const Vector excess = mu(t) - Vector::Constant(assets, scalar_at(r, t));
    return s.partialPivLu().solve(excess);
}

ProblemSpec build_mean_variance(const MarketModel& market, double nu, double T, double x0,
                                const TimeGrid* sampling) {
    check_market_shapes(market);
    if (!(nu > 0.0)) throw DomainError("mean-variance: nu must be positive");
    const int m = market.assets;
    const auto mi = static_cast<Eigen::Index>(m);

    ProblemSpec spec;
    spec.T = T;
    spec.x0 = Vector::Constant(1, x0);
    auto& c = spec.coeffs;
    c.n = 1;
    c.m = m;
    c.d = m;

    if (market.is_constant()) {
        check_volatility(market, 0.0);
        c.A = market.r;
        c.B = TimeFunctionMatrix::constant(market.b(0.0).transpose());
    } else {
        const TimeGrid grid = sampling ? *sampling : TimeGrid(T, 4000);
        for (int k = 0; k < grid.nodes(); ++k) check_volatility(market, grid.t(k));
        c.A = market.r.is_constant() ? market.r : TimeFunctionMatrix::sample(grid, [&](double t) {
            return scalar(scalar_at(market.r, t));
        });
        c.B = TimeFunctionMatrix::sample(grid, [&](double t) { return Matrix(market.b(t).transpose()); });
    }
    c.Atilde = TimeFunctionMatrix::zero(1, 1);
    c.Btilde = TimeFunctionMatrix::zero(1, mi);
    for (int j = 0; j < m; ++j) {
        c.C.push_back(TimeFunctionMatrix::zero(1, 1));
        c.Ctilde.push_back(TimeFunctionMatrix::zero(1, 1));
        Matrix e = Matrix::Zero(1, mi);
        e(0, j) = 1.0;
        c.D.push_back(TimeFunctionMatrix::constant(e));
        c.Dtilde.push_back(TimeFunctionMatrix::zero(1, mi));
    }

    auto& w = spec.weights;
    w.Q = w.Qtilde = TimeFunctionMatrix::zero(1, 1);
    w.S = w.Stilde = TimeFunctionMatrix::zero(1, mi);
    w.R = w.Rtilde = TimeFunctionMatrix::zero(mi, mi);
    w.G = SymMatrix(scalar(nu / 2.0));
    w.Gtilde = SymMatrix(scalar(-nu / 2.0));
    w.ell = Vector::Constant(1, -0.5);
    return spec;
}

ClosedFormBundle mv_closed_forms(const MarketModel& market, double nu, double T) {
    check_market_shapes(market);
    const auto bps = merged_breakpoints(market, T);
    const bool constant = market.is_constant();
    const double r0 = scalar_at(market.r, 0.0);
    const double b20 = market.b(0.0).squaredNorm();

    // int_t^T r and int_t^T |b|^2
    auto int_r = [=](double t) {
        if (constant) return r0 * (T - t);
        return integrate_piecewise([&](double s) { return scalar_at(market.r, s); }, t, T, bps);
    };
    auto int_b2 = [=](double t) {
        if (constant) return b20 * (T - t);
        return integrate_piecewise([&](double s) { return market.b(s).squaredNorm(); }, t, T, bps);
    };

    ClosedFormBundle cf;
    cf.add("P", "mean-variance: P = (nu/2) exp(int_t^T (2r - |b|^2))",
           [=](double t) { return scalar(nu / 2.0 * std::exp(2.0 * int_r(t) - int_b2(t))); });
    cf.add("Phat", "mean-variance: Phat vanishes since Ghat = 0 and Qhat = 0",
           [](double) { return scalar(0.0); });
    cf.add("phi", "mean-variance: phi = -(1/2) exp(int_t^T r)",
           [=](double t) { return scalar(-0.5 * std::exp(int_r(t))); });
    cf.add("gain", "mean-variance: feedback gain on X - EX is -b",
           [=](double t) { return Matrix(-market.b(t)); });
    cf.add("offset", "mean-variance: offset = (b/nu) exp(int_t^T (|b|^2 - r))",
           [=](double t) { return Matrix(market.b(t) / nu * std::exp(int_b2(t) - int_r(t))); });
    return cf;
}

SpeedExample build_speed_example(const SpeedParams& p) {
    SpeedExample ex;
    auto& spec = ex.spec;
    spec.T = p.T;
    spec.x0 = Vector::Constant(1, p.x0);
    auto& c = spec.coeffs;
    c.n = c.m = c.d = 1;
    c.A = cst(p.a);
    c.Atilde = cst(p.atilde);
    c.B = cst(p.b);
    c.Btilde = cst(p.btilde);
    c.C = {cst(0.0)};
    c.Ctilde = {cst(0.0)};
    c.D = {cst(1.0)};
    c.Dtilde = {cst(0.0)};
    auto& w = spec.weights;
    w.Q = cst(p.alpha);
    w.Qtilde = cst(0.0);
    w.S = w.Stilde = cst(0.0);
    w.R = cst(-p.beta);
    w.Rtilde = cst(0.0);
    w.G = SymMatrix(scalar(p.gamma));
    w.Gtilde = SymMatrix(scalar(0.0));

    auto fmt = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    if (p.alpha < 0.0) ex.warnings.push_back("alpha = " + fmt(p.alpha) + " is negative");
    if (!(p.gamma > std::max(p.beta, 0.0))) {
        ex.warnings.push_back("gamma = " + fmt(p.gamma) + " does not exceed max(beta, 0) = " +
                              fmt(std::max(p.beta, 0.0)));
    } else {
        const double need = p.b * p.b * p.gamma / (2.0 * (p.gamma - p.beta));
        if (p.a < need) {
            ex.warnings.push_back("a = " + fmt(p.a) + " is below b^2 gamma / (2 (gamma - beta)) = " + fmt(need));
        }
    }
    return ex;
}

double speed_K_exact(const SpeedParams& p, double t) {
    if (!(p.gamma > p.beta)) throw DomainError("speed compensator requires gamma > beta");
    const double ahat = p.a + p.atilde;
    const double bhat = p.b + p.btilde;
    const double c = bhat * bhat / (p.gamma - p.beta);
    const double tau = p.T - t;
    const double x = -2.0 * ahat * tau;
    const double integral = ahat == 0.0 ? tau : -std::expm1(x) / (2.0 * ahat);
    return 1.0 / (std::exp(x) / p.gamma + c * integral);
}

CompensatorPair speed_compensator(const SpeedParams& p, int samples) {
    if (!(p.gamma > p.beta)) throw DomainError("speed compensator requires gamma > beta");
    if (samples < 1) throw EmptyGrid();
    const double ahat = p.a + p.atilde;
    const double bhat = p.b + p.btilde;
    const double c = bhat * bhat / (p.gamma - p.beta);
    const TimeGrid grid(p.T, samples);
    std::vector<Matrix> fdot;
    fdot.reserve(static_cast<std::size_t>(grid.nodes()));
    for (int k = 0; k < grid.nodes(); ++k) {
        const double K = speed_K_exact(p, grid.t(k));
        fdot.push_back(scalar(-2.0 * ahat * K + c * K * K));
    }
    // anchor so that the piecewise-quadratic integral lands on K(T) = gamma
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < fdot.size(); ++k) total += 0.5 * grid.dt() * (fdot[k](0, 0) + fdot[k + 1](0, 0));
    const SymMatrix F0(scalar(p.gamma - total));
    CompensatorPair out;
    out.H = LambdaFunction::constant(SymMatrix(scalar(p.gamma)));
    out.K = LambdaFunction(F0, TimeFunctionMatrix::sampled(p.T, std::move(fdot)));
    return out;
}

double speed_closed_loop_control(const SpeedParams& p, double P, double Phat, double x, double xbar) {
    const double bhat = p.b + p.btilde;
    return -(p.b * P * (x - xbar) + bhat * Phat * xbar) / (P - p.beta);
}

double speed_open_loop_control(const SpeedParams& p, double Y, double Ybar, double Z) {
    if (p.beta == 0.0) throw DomainError("adjoint form of the control requires beta != 0");
    return (p.b * Y + p.btilde * Ybar + Z) / p.beta;
}

namespace {

/// G e^{2a tau} + q (e^{2a tau} - 1) / (2a)
double linear_riccati(double a, double q, double G, double tau) {
    const double x = 2.0 * a * tau;
    const double growth = a == 0.0 ? tau : std::expm1(x) / (2.0 * a);
    return G * std::exp(x) + q * growth;
}

}  // namespace

ProblemSpec build_negdef_example(const NegDefParams& p, const TimeGrid* check) {
    if (!(p.theta > 0.0)) throw DomainError("negative-definite example requires theta > 0");
    const TimeGrid grid = check ? *check : TimeGrid(p.T, 2000);
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.t(k);
        const double bound = p.beta * p.beta * linear_riccati(p.alpha, p.gamma, p.G, p.T - t);
        if (!(p.theta < bound)) throw ThetaBoundViolated(t, p.theta, bound);
    }
    ProblemSpec spec;
    spec.T = p.T;
    spec.x0 = Vector::Constant(1, p.x0);
    auto& c = spec.coeffs;
    c.n = c.m = c.d = 1;
    c.A = cst(p.alpha);
    c.Atilde = cst(p.atilde);
    c.B = c.Btilde = cst(0.0);
    c.C = {cst(0.0)};
    c.Ctilde = {cst(0.0)};
    c.D = {cst(p.beta)};
    c.Dtilde = {cst(0.0)};
    auto& w = spec.weights;
    w.Q = cst(p.gamma);
    w.Qtilde = cst(p.gammatilde);
    w.S = w.Stilde = cst(0.0);
    w.R = cst(-p.theta);
    w.Rtilde = cst(0.0);
    w.G = SymMatrix(scalar(p.G));
    w.Gtilde = SymMatrix(scalar(0.0));
    return spec;
}

ClosedFormBundle negdef_closed_forms(const NegDefParams& p) {
    ClosedFormBundle cf;
    const double ahat = p.alpha + p.atilde;
    const double qhat = p.gamma + p.gammatilde;
    auto P = [=](double t) { return linear_riccati(p.alpha, p.gamma, p.G, p.T - t); };
    auto Phat = [=](double t) { return linear_riccati(ahat, qhat, p.G, p.T - t); };
    auto mean = [=](double t) { return p.x0 * std::exp(ahat * t); };
    cf.add("P", "negative-definite example: linear Riccati with rate alpha and weight gamma",
           [=](double t) { return scalar(P(t)); });
    cf.add("Phat", "negative-definite example: linear Riccati with rate alpha + atilde and weight gamma + gammatilde",
           [=](double t) { return scalar(Phat(t)); });
    cf.add("mean", "negative-definite example: EX = x0 exp((alpha + atilde) t)",
           [=](double t) { return scalar(mean(t)); });
    cf.add("X", "negative-definite example: the optimal state is deterministic and equals EX",
           [=](double t) { return scalar(mean(t)); });
    cf.add("Y", "negative-definite example: Y = Phat EX", [=](double t) { return scalar(Phat(t) * mean(t)); });
    cf.add("Z", "negative-definite example: Z = 0", [](double) { return scalar(0.0); });
    cf.add("control", "negative-definite example: optimal control vanishes", [](double) { return scalar(0.0); });
    return cf;
}

}  // namespace mflq
