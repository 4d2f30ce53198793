#include "mflq/riccati.hpp"

#include "mflq/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mflq {

namespace {

Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void finish_gain(GainTerms& g, double t, double floor, const char* which) {
    g.N = sym(g.N);
    g.margin = min_eigenvalue_sym(g.N);
    if (!(g.margin > floor)) throw SingularGainDenominator(which, t, g.margin);
    Eigen::LLT<Matrix> llt(g.N);
    g.Gamma = -llt.solve(g.L.transpose());
}

/// Linear interpolation weight for t on grid: node index i and weight w of node i+1.
void locate(const TimeGrid& grid, double t, int& i, double& w) {
    double s = t / grid.dt();
    const double nearest = std::round(s);
    if (std::abs(s - nearest) <= 1e-9 * std::max(1.0, std::abs(s))) s = nearest;
    if (s <= 0.0) {
        i = 0;
        w = 0.0;
    } else if (s >= grid.steps()) {
        i = grid.steps();
        w = 0.0;
    } else {
        i = static_cast<int>(std::floor(s));
        w = s - i;
    }
}

template <typename T>
T lerp_nodes(const std::vector<T>& v, const TimeGrid& grid, double t) {
    int i;
    double w;
    locate(grid, t, i, w);
    if (w == 0.0) return v[static_cast<std::size_t>(i)];
    return T((1.0 - w) * static_cast<const Matrix&>(v[static_cast<std::size_t>(i)]) +
             w * static_cast<const Matrix&>(v[static_cast<std::size_t>(i) + 1]));
}

SymMatrix hermite_mid(const SymMatrix& a, const SymMatrix& b, const SymMatrix& da, const SymMatrix& db, double dt) {
    return SymMatrix(0.5 * (a.matrix() + b.matrix()) + (dt / 8.0) * (da.matrix() - db.matrix()));
}

void check_symmetric(const Matrix& m, const char* what) {
    if (!(m - m.transpose()).isZero(0.0)) throw InvalidMatrix(std::string(what) + " lost symmetry");
}

}  // namespace

GainTerms gain_terms(const PointCoefficients& pc, const Matrix& P, double floor, const char* which) {
    GainTerms g;
    g.N = pc.R;
    g.L = P * pc.B + pc.S;
    for (std::size_t j = 0; j < pc.D.size(); ++j) {
        const Matrix PD = P * pc.D[j];
        g.N.noalias() += pc.D[j].transpose() * PD;
        g.L.noalias() += pc.C[j].transpose() * PD;
    }
    finish_gain(g, pc.t, floor, which);
    return g;
}

GainTerms gain_terms_hat(const PointCoefficients& pc, const Matrix& P, const Matrix& Phat, double floor,
                         const char* which) {
    GainTerms g;
    g.N = pc.Rhat;
    g.L = Phat * pc.Bhat + pc.Shat;
    for (std::size_t j = 0; j < pc.Dhat.size(); ++j) {
        const Matrix PD = P * pc.Dhat[j];
        g.N.noalias() += pc.Dhat[j].transpose() * PD;
        g.L.noalias() += pc.Chat[j].transpose() * PD;
    }
    finish_gain(g, pc.t, floor, which);
    return g;
}

Matrix gain_gamma(double t, const SymMatrix& P, const ProblemSpec& spec) {
    return gain_terms(evaluate_coefficients(spec, t), P.matrix()).Gamma;
}

Matrix gain_gamma_hat(double t, const SymMatrix& P, const SymMatrix& Phat, const ProblemSpec& spec) {
    return gain_terms_hat(evaluate_coefficients(spec, t), P.matrix(), Phat.matrix()).Gamma;
}

Matrix riccati_rhs(const PointCoefficients& pc, const Matrix& P, double floor, double* margin) {
    const GainTerms g = gain_terms(pc, P, floor, "sum_j D_j'PD_j + R");
    if (margin) *margin = g.margin;
    const Matrix PA = P * pc.A;
    Matrix f = PA + PA.transpose() + pc.Q;
    for (const auto& C : pc.C) f.noalias() += C.transpose() * P * C;
    f.noalias() += g.L * g.Gamma;  // - L N^{-1} L'
    return -sym(f);
}

Matrix riccati_hat_rhs(const PointCoefficients& pc, const Matrix& P, const Matrix& Phat, double floor,
                       double* margin) {
    const GainTerms g = gain_terms_hat(pc, P, Phat, floor, "sum_j Dhat_j'PDhat_j + Rhat");
    if (margin) *margin = g.margin;
    const Matrix KA = Phat * pc.Ahat;
    Matrix f = KA + KA.transpose() + pc.Qhat;
    for (const auto& C : pc.Chat) f.noalias() += C.transpose() * P * C;
    f.noalias() += g.L * g.Gamma;
    return -sym(f);
}

SymMatrix RiccatiSolution::P_at(double t) const { return lerp_nodes(P, grid, t); }

SymMatrix RiccatiSolution::Phat_at(double t) const { return lerp_nodes(Phat, grid, t); }

Vector RiccatiSolution::phi_at(double t, int n) const {
    if (!phi) return Vector::Zero(n);
    int i;
    double w;
    locate(grid, t, i, w);
    const auto& v = *phi;
    if (w == 0.0) return v[static_cast<std::size_t>(i)];
    return (1.0 - w) * v[static_cast<std::size_t>(i)] + w * v[static_cast<std::size_t>(i) + 1];
}

SymMatrix RiccatiSolution::P_mid(int k) const {
    const auto i = static_cast<std::size_t>(k);
    return hermite_mid(P[i], P[i + 1], Pdot[i], Pdot[i + 1], grid.dt());
}

SymMatrix RiccatiSolution::Phat_mid(int k) const {
    const auto i = static_cast<std::size_t>(k);
    return hermite_mid(Phat[i], Phat[i + 1], Phatdot[i], Phatdot[i + 1], grid.dt());
}

namespace {

/// Fills gains, margins, value0 from P, Phat; derivatives must already be set.
void fill_gains(const ProblemSpec& spec, const CoefficientTable& table, RiccatiSolution& sol, double floor) {
    const int nodes = sol.grid.nodes();
    sol.Gamma.resize(static_cast<std::size_t>(nodes));
    sol.GammaHat.resize(static_cast<std::size_t>(nodes));
    sol.margin.resize(static_cast<std::size_t>(nodes));
    sol.margin_hat.resize(static_cast<std::size_t>(nodes));
    for (int k = 0; k < nodes; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const auto& pc = table.at_node(k);
        const auto g = gain_terms(pc, sol.P[i].matrix(), floor, "sum_j D_j'PD_j + R");
        const auto gh = gain_terms_hat(pc, sol.P[i].matrix(), sol.Phat[i].matrix(), floor,
                                       "sum_j Dhat_j'PDhat_j + Rhat");
        sol.Gamma[i] = g.Gamma;
        sol.GammaHat[i] = gh.Gamma;
        sol.margin[i] = g.margin;
        sol.margin_hat[i] = gh.margin;
    }
    if (!spec.weights.ell) sol.value0 = spec.x0.dot(sol.Phat.front().matrix() * spec.x0);
    else sol.value0.reset();
}

void solve_phi_table(const ProblemSpec& spec, const CoefficientTable& table, RiccatiSolution& sol, double floor) {
    const auto& grid = sol.grid;
    const int N = grid.steps();
    const double h = grid.dt();
    std::vector<Vector> phi(static_cast<std::size_t>(N + 1));
    phi.back() = *spec.weights.ell;
    auto rhs = [&](const PointCoefficients& pc, const SymMatrix& P, const SymMatrix& Phat, const Vector& v) {
        const auto gh = gain_terms_hat(pc, P.matrix(), Phat.matrix(), floor, "sum_j Dhat_j'PDhat_j + Rhat");
        const Matrix M = pc.Ahat + pc.Bhat * gh.Gamma;
        return Vector(-(M.transpose() * v));
    };
    for (int k = N - 1; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        const auto& pc1 = table.at_half(2 * k + 2);
        const auto& pcm = table.at_half(2 * k + 1);
        const auto& pc0 = table.at_half(2 * k);
        const SymMatrix Pm = sol.P_mid(k);
        const SymMatrix Km = sol.Phat_mid(k);
        const Vector& y = phi[i + 1];
        const Vector k1 = rhs(pc1, sol.P[i + 1], sol.Phat[i + 1], y);
        const Vector k2 = rhs(pcm, Pm, Km, y - 0.5 * h * k1);
        const Vector k3 = rhs(pcm, Pm, Km, y - 0.5 * h * k2);
        const Vector k4 = rhs(pc0, sol.P[i], sol.Phat[i], y - h * k3);
        phi[i] = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    sol.phi = std::move(phi);
}

}  // namespace

RiccatiSolution solve_riccati(const ProblemSpec& spec, const TimeGrid& grid, const RiccatiOptions& opts) {
    require_valid(spec);
    if (grid.steps() < 10) throw DomainError("solve_riccati: grid needs at least 10 steps");
    if (std::abs(grid.horizon() - spec.T) > 1e-12 * std::max(1.0, spec.T)) {
        throw DomainError("solve_riccati: grid horizon differs from problem horizon");
    }
    const double floor = opts.margin_floor;
    const CoefficientTable table(spec, grid);
    const int N = grid.steps();
    const double h = grid.dt();
    const auto nodes = static_cast<std::size_t>(N + 1);

    RiccatiSolution sol;
    sol.grid = grid;
    sol.P.resize(nodes);
    sol.Phat.resize(nodes);
    sol.Pdot.resize(nodes);
    sol.Phatdot.resize(nodes);

    sol.P.back() = spec.weights.G;
    sol.Pdot.back() = SymMatrix(riccati_rhs(table.at_node(N), sol.P.back().matrix(), floor));
    for (int k = N - 1; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        const Matrix& y = sol.P[i + 1].matrix();
        const auto& pcm = table.at_half(2 * k + 1);
        const Matrix& k1 = sol.Pdot[i + 1].matrix();
        const Matrix k2 = riccati_rhs(pcm, y - 0.5 * h * k1, floor);
        const Matrix k3 = riccati_rhs(pcm, y - 0.5 * h * k2, floor);
        const Matrix k4 = riccati_rhs(table.at_node(k), y - h * k3, floor);
        const Matrix next = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_symmetric(next, "P");
        sol.P[i] = SymMatrix(next);
        sol.Pdot[i] = SymMatrix(riccati_rhs(table.at_node(k), next, floor));
    }

    sol.Phat.back() = terminal_hat(spec);
    sol.Phatdot.back() =
        SymMatrix(riccati_hat_rhs(table.at_node(N), sol.P.back().matrix(), sol.Phat.back().matrix(), floor));
    for (int k = N - 1; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        const Matrix& y = sol.Phat[i + 1].matrix();
        const auto& pcm = table.at_half(2 * k + 1);
        const Matrix Pm = sol.P_mid(k).matrix();
        const Matrix& k1 = sol.Phatdot[i + 1].matrix();
        const Matrix k2 = riccati_hat_rhs(pcm, Pm, y - 0.5 * h * k1, floor);
        const Matrix k3 = riccati_hat_rhs(pcm, Pm, y - 0.5 * h * k2, floor);
        const Matrix k4 = riccati_hat_rhs(table.at_node(k), sol.P[i].matrix(), y - h * k3, floor);
        const Matrix next = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_symmetric(next, "Phat");
        sol.Phat[i] = SymMatrix(next);
        sol.Phatdot[i] = SymMatrix(riccati_hat_rhs(table.at_node(k), sol.P[i].matrix(), next, floor));
    }

    fill_gains(spec, table, sol, floor);
    if (spec.weights.ell) solve_phi_table(spec, table, sol, floor);
    return sol;
}

const std::vector<Vector>& solve_phi(const ProblemSpec& spec, RiccatiSolution& sol, double margin_floor) {
    if (!spec.weights.ell) throw MissingLinearTerm();
    const CoefficientTable table(spec, sol.grid);
    solve_phi_table(spec, table, sol, margin_floor);
    return *sol.phi;
}

Vector feedback_offset(double t, const RiccatiSolution& sol, const ProblemSpec& spec) {
    const auto pc = evaluate_coefficients(spec, t);
    const Vector phi = sol.phi_at(t, spec.n());
    const auto gh = gain_terms_hat(pc, sol.P_at(t).matrix(), sol.Phat_at(t).matrix());
    Eigen::LLT<Matrix> llt(gh.N);
    return -llt.solve(pc.Bhat.transpose() * phi);
}

RiccatiResidual riccati_residual(const ProblemSpec& spec, const RiccatiSolution& sol) {
    const auto& grid = sol.grid;
    if (grid.steps() < 4) throw DomainError("riccati_residual: need at least 3 interior nodes");
    const double h = grid.dt();
    RiccatiResidual r;
    for (int k = 1; k < grid.steps(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        const auto pc = evaluate_coefficients(spec, grid.t(k));
        const Matrix dP = (sol.P[i + 1].matrix() - sol.P[i - 1].matrix()) / (2.0 * h);
        const Matrix dK = (sol.Phat[i + 1].matrix() - sol.Phat[i - 1].matrix()) / (2.0 * h);
        r.P = std::max(r.P, max_abs(dP - riccati_rhs(pc, sol.P[i].matrix(), 0.0)));
        r.Phat = std::max(r.Phat, max_abs(dK - riccati_hat_rhs(pc, sol.P[i].matrix(), sol.Phat[i].matrix(), 0.0)));
        if (sol.phi) {
            const auto& phi = *sol.phi;
            const Vector dphi = (phi[i + 1] - phi[i - 1]) / (2.0 * h);
            const auto gh = gain_terms_hat(pc, sol.P[i].matrix(), sol.Phat[i].matrix());
            const Vector rhs = -((pc.Ahat + pc.Bhat * gh.Gamma).transpose() * phi[i]);
            r.phi = std::max(r.phi, max_abs(dphi - rhs));
        }
    }
    return r;
}

RiccatiSolution solution_from_nodes(const ProblemSpec& spec, const TimeGrid& grid, std::vector<SymMatrix> P,
                                    std::vector<SymMatrix> Phat, std::optional<std::vector<Vector>> phi) {
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    if (P.size() != nodes || Phat.size() != nodes || (phi && phi->size() != nodes)) {
        throw DomainError("solution_from_nodes: node count does not match grid");
    }
    const CoefficientTable table(spec, grid);
    RiccatiSolution sol;
    sol.grid = grid;
    sol.P = std::move(P);
    sol.Phat = std::move(Phat);
    sol.phi = std::move(phi);
    sol.Pdot.resize(nodes);
    sol.Phatdot.resize(nodes);
    for (int k = 0; k < grid.nodes(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        sol.Pdot[i] = SymMatrix(riccati_rhs(table.at_node(k), sol.P[i].matrix(), 0.0));
        sol.Phatdot[i] = SymMatrix(riccati_hat_rhs(table.at_node(k), sol.P[i].matrix(), sol.Phat[i].matrix(), 0.0));
    }
    fill_gains(spec, table, sol, 0.0);
    return sol;
}

BackwardEulerSolution solve_riccati_backward_euler(const ProblemSpec& spec, const TimeGrid& grid,
                                                   double margin_floor) {
    require_valid(spec);
    const int N = grid.steps();
    const double h = grid.dt();
    BackwardEulerSolution out;
    out.grid = grid;
    out.P.resize(static_cast<std::size_t>(N + 1));
    out.Phat.resize(static_cast<std::size_t>(N + 1));
    out.P.back() = spec.weights.G;
    out.Phat.back() = terminal_hat(spec);
    constexpr int kMaxIterations = 100;
    // Each implicit step y = y_next - h F(t_k, y) is a contraction for small h.
    auto implicit_step = [&](const Matrix& y_next, auto&& F) {
        Matrix y = y_next;
        for (int it = 0; it < kMaxIterations; ++it) {
            const Matrix y_new = y_next - h * F(y);
            const double change = max_abs(y_new - y);
            y = y_new;
            if (change <= 4e-16 * std::max(1.0, max_abs(y))) break;
        }
        return y;
    };
    for (int k = N - 1; k >= 0; --k) {
        const auto i = static_cast<std::size_t>(k);
        const auto pc = evaluate_coefficients(spec, grid.t(k));
        const Matrix Pk =
            implicit_step(out.P[i + 1].matrix(), [&](const Matrix& y) { return riccati_rhs(pc, y, margin_floor); });
        out.P[i] = SymMatrix(Pk);
        const Matrix Kk = implicit_step(out.Phat[i + 1].matrix(), [&](const Matrix& y) {
            return riccati_hat_rhs(pc, Pk, y, margin_floor);
        });
        out.Phat[i] = SymMatrix(Kk);
    }
    return out;
}

}  // namespace mflq
