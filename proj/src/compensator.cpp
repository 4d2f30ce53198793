#include "mflq/compensator.hpp"

#include "mflq/errors.hpp"
#include "mflq/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mflq {

namespace {

bool all_zero(const TimeFunctionMatrix& f) {
    return std::all_of(f.samples().begin(), f.samples().end(), [](const Matrix& m) { return m.isZero(0.0); });
}

bool is_zero(const LambdaFunction& f) { return f.F0().matrix().isZero(0.0) && all_zero(f.fdot()); }

bool constant_valued(const LambdaFunction& f) { return f.fdot().is_constant() && all_zero(f.fdot()); }

}  // namespace

LambdaFunction::LambdaFunction(SymMatrix F0, TimeFunctionMatrix fdot) : F0_(std::move(F0)), fdot_(std::move(fdot)) {
    if (fdot_.rows() != F0_.dim() || fdot_.cols() != F0_.dim()) {
        throw InvalidMatrix("LambdaFunction: derivative shape does not match initial value");
    }
    for (const auto& s : fdot_.samples()) {
        if (max_abs(s - s.transpose()) > 1e-12 * std::max(1.0, max_abs(s))) {
            throw InvalidMatrix("LambdaFunction: derivative samples must be symmetric");
        }
    }
    if (!fdot_.is_constant()) {
        const auto& s = fdot_.samples();
        const double dt = fdot_.horizon() / static_cast<double>(s.size() - 1);
        cumulative_.reserve(s.size());
        cumulative_.push_back(F0_.matrix());
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            cumulative_.push_back(cumulative_.back() + 0.5 * dt * (s[i] + s[i + 1]));
        }
    }
}

LambdaFunction LambdaFunction::zero(int n) { return LambdaFunction(SymMatrix::zero(n), TimeFunctionMatrix::zero(n, n)); }

LambdaFunction LambdaFunction::constant(const SymMatrix& value) {
    return LambdaFunction(value, TimeFunctionMatrix::zero(value.dim(), value.dim()));
}

SymMatrix LambdaFunction::value(double t) const {
    if (fdot_.is_constant()) return SymMatrix(F0_.matrix() + t * fdot_.samples().front());
    const auto& s = fdot_.samples();
    const std::size_t intervals = s.size() - 1;
    const double T = fdot_.horizon();
    const double dt = T / static_cast<double>(intervals);
    t = std::clamp(t, 0.0, T);
    double pos = t / dt;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, pos)) pos = nearest;
    std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i >= intervals) return SymMatrix(cumulative_.back());
    const double tau = (pos - static_cast<double>(i)) * dt;
    if (tau == 0.0) return SymMatrix(cumulative_[i]);
    const Matrix slope = (s[i + 1] - s[i]) / dt;
    return SymMatrix(cumulative_[i] + tau * s[i] + (0.5 * tau * tau) * slope);
}

SymMatrix LambdaFunction::derivative(double t) const { return SymMatrix(fdot_(t)); }

LambdaFunction LambdaFunction::operator-() const {
    if (fdot_.is_constant()) return LambdaFunction(-1.0 * F0_, TimeFunctionMatrix::constant(-fdot_.samples().front()));
    std::vector<Matrix> s;
    for (const auto& m : fdot_.samples()) s.push_back(-m);
    return LambdaFunction(-1.0 * F0_, TimeFunctionMatrix::sampled(fdot_.horizon(), std::move(s)));
}

LambdaFunction operator+(const LambdaFunction& a, const LambdaFunction& b) {
    const auto& fa = a.fdot();
    const auto& fb = b.fdot();
    const SymMatrix F0 = a.F0() + b.F0();
    if (fa.is_constant() && fb.is_constant()) {
        return LambdaFunction(F0, TimeFunctionMatrix::constant(fa.samples().front() + fb.samples().front()));
    }
    const TimeFunctionMatrix& grid_source = fa.is_constant() ? fb : fa;
    if (!fa.is_constant() && !fb.is_constant() &&
        (fa.samples().size() != fb.samples().size() || fa.horizon() != fb.horizon())) {
        throw DomainError("LambdaFunction sum: derivative sample grids differ");
    }
    const auto count = grid_source.samples().size();
    const double T = grid_source.horizon();
    std::vector<Matrix> s;
    s.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = k + 1 == count ? T : T * static_cast<double>(k) / static_cast<double>(count - 1);
        s.push_back(fa(t) + fb(t));
    }
    return LambdaFunction(F0, TimeFunctionMatrix::sampled(T, std::move(s)));
}

ShiftedQuadruple shifted_quadruple(const PointCoefficients& pc, const ProblemSpec& spec, const CompensatorPair& comp) {
    const double t = pc.t;
    const Matrix H = comp.H.value(t).matrix();
    const Matrix K = comp.K.value(t).matrix();
    const Matrix Hdot = comp.H.derivative(t).matrix();
    const Matrix Kdot = comp.K.derivative(t).matrix();

    const Matrix HA = H * pc.A;
    Matrix Q = Hdot + HA + HA.transpose() + pc.Q;
    Matrix S = H * pc.B + pc.S;
    Matrix R = pc.R;
    const Matrix KA = K * pc.Ahat;
    Matrix Qh = Kdot + KA + KA.transpose() + pc.Qhat;
    Matrix Sh = K * pc.Bhat + pc.Shat;
    Matrix Rh = pc.Rhat;
    for (std::size_t j = 0; j < pc.C.size(); ++j) {
        const Matrix HC = H * pc.C[j];
        const Matrix HD = H * pc.D[j];
        Q.noalias() += pc.C[j].transpose() * HC;
        S.noalias() += pc.C[j].transpose() * HD;
        R.noalias() += pc.D[j].transpose() * HD;
        const Matrix HCh = H * pc.Chat[j];
        const Matrix HDh = H * pc.Dhat[j];
        Qh.noalias() += pc.Chat[j].transpose() * HCh;
        Sh.noalias() += pc.Chat[j].transpose() * HDh;
        Rh.noalias() += pc.Dhat[j].transpose() * HDh;
    }
    ShiftedQuadruple out;
    out.Q = SymMatrix(Q);
    out.Qhat = SymMatrix(Qh);
    out.S = S;
    out.Shat = Sh;
    out.R = SymMatrix(R);
    out.Rhat = SymMatrix(Rh);
    out.G = spec.weights.G - comp.H.value(spec.T);
    out.Ghat = terminal_hat(spec) - comp.K.value(spec.T);
    return out;
}

ShiftedQuadruple shifted_quadruple(const ProblemSpec& spec, const CompensatorPair& comp, double t) {
    return shifted_quadruple(evaluate_coefficients(spec, t), spec, comp);
}

TimeGrid default_shift_sampling(double T) { return TimeGrid(T, 4000); }

ProblemSpec shifted_problem(const ProblemSpec& spec, const CompensatorPair& comp) {
    return shifted_problem(spec, comp, default_shift_sampling(spec.T));
}

ProblemSpec shifted_problem(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& sampling) {
    if (comp.H.dim() != spec.n() || comp.K.dim() != spec.n()) {
        throw InvalidMatrix("shifted_problem: compensator dimension does not match the state");
    }
    if (is_zero(comp.H) && is_zero(comp.K)) return spec;

    const auto& c = spec.coeffs;
    const auto& w = spec.weights;
    bool constant = constant_valued(comp.H) && constant_valued(comp.K);
    for (const auto* f : {&c.A, &c.Atilde, &c.B, &c.Btilde, &w.Q, &w.Qtilde, &w.S, &w.Stilde, &w.R, &w.Rtilde}) {
        constant = constant && f->is_constant();
    }
    for (const auto* v : {&c.C, &c.Ctilde, &c.D, &c.Dtilde}) {
        for (const auto& f : *v) constant = constant && f.is_constant();
    }

    ProblemSpec out = spec;
    const auto sq0 = shifted_quadruple(spec, comp, 0.0);
    out.weights.G = sq0.G;
    out.weights.Gtilde = sq0.Ghat - sq0.G;
    if (constant) {
        out.weights.Q = TimeFunctionMatrix::constant(sq0.Q.matrix());
        out.weights.Qtilde = TimeFunctionMatrix::constant((sq0.Qhat - sq0.Q).matrix());
        out.weights.S = TimeFunctionMatrix::constant(sq0.S);
        out.weights.Stilde = TimeFunctionMatrix::constant(sq0.Shat - sq0.S);
        out.weights.R = TimeFunctionMatrix::constant(sq0.R.matrix());
        out.weights.Rtilde = TimeFunctionMatrix::constant((sq0.Rhat - sq0.R).matrix());
        return out;
    }
    if (std::abs(sampling.horizon() - spec.T) > 1e-12 * std::max(1.0, spec.T)) {
        throw DomainError("shifted_problem: sampling grid horizon differs from problem horizon");
    }
    std::vector<Matrix> Q, Qt, S, St, R, Rt;
    for (int k = 0; k < sampling.nodes(); ++k) {
        const auto sq = shifted_quadruple(spec, comp, sampling.t(k));
        Q.push_back(sq.Q.matrix());
        Qt.push_back((sq.Qhat - sq.Q).matrix());
        S.push_back(sq.S);
        St.push_back(sq.Shat - sq.S);
        R.push_back(sq.R.matrix());
        Rt.push_back((sq.Rhat - sq.R).matrix());
    }
    const double T = spec.T;
    out.weights.Q = TimeFunctionMatrix::sampled(T, std::move(Q));
    out.weights.Qtilde = TimeFunctionMatrix::sampled(T, std::move(Qt));
    out.weights.S = TimeFunctionMatrix::sampled(T, std::move(S));
    out.weights.Stilde = TimeFunctionMatrix::sampled(T, std::move(St));
    out.weights.R = TimeFunctionMatrix::sampled(T, std::move(R));
    out.weights.Rtilde = TimeFunctionMatrix::sampled(T, std::move(Rt));
    return out;
}

namespace {

struct GroupAccumulator {
    RCGroupReport r;
    std::vector<SymMatrix> denominators;

    GroupAccumulator() {
        r.inequality_min = std::numeric_limits<double>::infinity();
        r.denominator_min = std::numeric_limits<double>::infinity();
    }

    void add(double t, const SymMatrix& Qs, const Matrix& Ss, const SymMatrix& Rs) {
        const double den = min_eigenvalue(Rs);
        if (den < r.denominator_min) {
            r.denominator_min = den;
            r.denominator_worst_t = t;
        }
        denominators.push_back(Rs);
        double ineq = -std::numeric_limits<double>::infinity();
        if (den > kMarginFloor) {
            Eigen::LLT<Matrix> llt(Rs.matrix());
            ineq = min_eigenvalue(SymMatrix(Qs.matrix() - Ss * llt.solve(Ss.transpose())));
        }
        if (ineq < r.inequality_min) {
            r.inequality_min = ineq;
            r.inequality_worst_t = t;
        }
    }

    RCGroupReport finish(const SymMatrix& terminal_gap, double delta, double tol) {
        r.terminal_min = min_eigenvalue(terminal_gap);
        r.terminal_ok = r.terminal_min >= -tol;
        r.inequality_ok = r.inequality_min >= -tol;
        r.denominator_ok = is_uniformly_pd(denominators, delta);
        return r;
    }
};

}  // namespace

RCReport check_condition_rc(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid, double delta,
                            double tol) {
    if (!(delta > 0.0)) throw DomainError("check_condition_rc: delta must be positive");
    GroupAccumulator dev, mean;
    ShiftedQuadruple last;
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.t(k);
        last = shifted_quadruple(spec, comp, t);
        dev.add(t, last.Q, last.S, last.R);
        mean.add(t, last.Qhat, last.Shat, last.Rhat);
    }
    RCReport out;
    out.deviation = dev.finish(last.G, delta, tol);
    out.mean = mean.finish(last.Ghat, delta, tol);
    return out;
}

RCPDEquivalence rc_pd_equivalence(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid,
                                  double delta, double tol) {
    RCPDEquivalence out;
    out.rc = check_condition_rc(spec, comp, grid, delta, tol).pass();
    out.pd_shifted = check_condition_pd(shifted_problem(spec, comp, grid), grid, delta, tol).pass();
    return out;
}

CostShift cost_shift_check(const ProblemSpec& spec, const CompensatorPair& comp, const FeedbackLaw& law,
                           const TimeGrid& grid) {
    CostShift out;
    out.J = propagate_moments(spec, law, grid).totalCost;
    out.J_hk = propagate_moments(shifted_problem(spec, comp, grid.refined(2)), law, grid).totalCost;
    out.K0_term = spec.x0.dot(comp.K.value(0.0).matrix() * spec.x0);
    return out;
}

TransformErrors riccati_transform_check(const ProblemSpec& spec, const CompensatorPair& comp, const TimeGrid& grid) {
    const auto sol = solve_riccati(spec, grid);
    const auto shifted = solve_riccati(shifted_problem(spec, comp, grid.refined(2)), grid);
    TransformErrors e;
    for (int k = 0; k < grid.nodes(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        const double t = grid.t(k);
        e.P = std::max(e.P, max_abs(shifted.P[i].matrix() - (sol.P[i].matrix() - comp.H.value(t).matrix())));
        e.Phat = std::max(e.Phat,
                          max_abs(shifted.Phat[i].matrix() - (sol.Phat[i].matrix() - comp.K.value(t).matrix())));
    }
    return e;
}

}  // namespace mflq
