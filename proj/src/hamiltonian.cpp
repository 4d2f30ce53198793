#include "mflq/hamiltonian.hpp"

#include "mflq/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mflq {

HamiltonianPoint HamiltonianPoint::zero(const ProblemSpec& spec, double t) {
    HamiltonianPoint p;
    p.t = t;
    p.x = p.xbar = p.y = p.ybar = Vector::Zero(spec.n());
    p.u = p.ubar = Vector::Zero(spec.m());
    p.z.assign(static_cast<std::size_t>(spec.d()), Vector::Zero(spec.n()));
    p.zbar = p.z;
    return p;
}

HamiltonianPoint HamiltonianPoint::operator+(const HamiltonianPoint& o) const {
    HamiltonianPoint r = *this;
    r.x += o.x;
    r.xbar += o.xbar;
    r.u += o.u;
    r.ubar += o.ubar;
    r.y += o.y;
    r.ybar += o.ybar;
    for (std::size_t j = 0; j < z.size(); ++j) {
        r.z[j] += o.z[j];
        r.zbar[j] += o.zbar[j];
    }
    return r;
}

HamiltonianPoint HamiltonianPoint::operator*(double s) const {
    HamiltonianPoint r = *this;
    r.x *= s;
    r.xbar *= s;
    r.u *= s;
    r.ubar *= s;
    r.y *= s;
    r.ybar *= s;
    for (std::size_t j = 0; j < z.size(); ++j) {
        r.z[j] *= s;
        r.zbar[j] *= s;
    }
    return r;
}

namespace {

Vector g_at(const PointCoefficients& pc, const HamiltonianPoint& p) {
    Vector g = pc.Q * p.x + pc.Qtilde * p.xbar + pc.S * p.u + pc.Stilde * p.ubar + pc.A.transpose() * p.y +
               pc.Atilde.transpose() * p.ybar;
    for (std::size_t j = 0; j < pc.C.size(); ++j) {
        g.noalias() += pc.C[j].transpose() * p.z[j];
        g.noalias() += pc.Ctilde[j].transpose() * p.zbar[j];
    }
    return g;
}

Vector psi_at(const PointCoefficients& pc, const HamiltonianPoint& p) {
    Vector s = pc.S.transpose() * p.x + pc.Stilde.transpose() * p.xbar + pc.R * p.u + pc.Rtilde * p.ubar +
               pc.B.transpose() * p.y + pc.Btilde.transpose() * p.ybar;
    for (std::size_t j = 0; j < pc.D.size(); ++j) {
        s.noalias() += pc.D[j].transpose() * p.z[j];
        s.noalias() += pc.Dtilde[j].transpose() * p.zbar[j];
    }
    return s;
}

DecoupledAdjoint decouple_at(const PointCoefficients& pc, const Matrix& P, const Matrix& Phat, const Vector& phi,
                             const Vector& x, const Vector& xbar, const Vector& u, const Vector& ubar) {
    DecoupledAdjoint a;
    a.Ybar = Phat * xbar + phi;
    a.Y = P * (x - xbar) + a.Ybar;
    a.Z.resize(pc.C.size());
    a.Zbar.resize(pc.C.size());
    for (std::size_t j = 0; j < pc.C.size(); ++j) {
        a.Z[j] = P * (pc.C[j] * x + pc.Ctilde[j] * xbar + pc.D[j] * u + pc.Dtilde[j] * ubar);
        a.Zbar[j] = P * (pc.Chat[j] * xbar + pc.Dhat[j] * ubar);
    }
    return a;
}

}  // namespace

Vector g_drift(const HamiltonianPoint& p, const ProblemSpec& spec) {
    return g_at(evaluate_coefficients(spec, p.t), p);
}

Vector psi(const HamiltonianPoint& p, const ProblemSpec& spec) { return psi_at(evaluate_coefficients(spec, p.t), p); }

DecoupledAdjoint decouple_adjoint(const ProblemSpec& spec, const RiccatiSolution& sol, const Vector& x,
                                  const Vector& xbar, const Vector& u, const Vector& ubar, double t) {
    return decouple_at(evaluate_coefficients(spec, t), sol.P_at(t).matrix(), sol.Phat_at(t).matrix(),
                       sol.phi_at(t, spec.n()), x, xbar, u, ubar);
}

OptimalControl optimal_control_at(const ProblemSpec& spec, const RiccatiSolution& sol, double t, const Vector& x,
                                  const Vector& xbar) {
    const auto pc = evaluate_coefficients(spec, t);
    const Matrix P = sol.P_at(t).matrix();
    const Matrix Phat = sol.Phat_at(t).matrix();
    const auto g = gain_terms(pc, P);
    const auto gh = gain_terms_hat(pc, P, Phat);
    OptimalControl out;
    out.ubar = gh.Gamma * xbar;
    if (sol.phi) {
        Eigen::LLT<Matrix> llt(gh.N);
        out.ubar -= llt.solve(pc.Bhat.transpose() * sol.phi_at(t, spec.n()));
    }
    out.u = g.Gamma * (x - xbar) + out.ubar;
    return out;
}

HamiltonianPoint optimal_point(const ProblemSpec& spec, const RiccatiSolution& sol, double t, const Vector& x,
                               const Vector& xbar) {
    const auto ctl = optimal_control_at(spec, sol, t, x, xbar);
    const auto adj = decouple_adjoint(spec, sol, x, xbar, ctl.u, ctl.ubar, t);
    HamiltonianPoint p;
    p.t = t;
    p.x = x;
    p.xbar = xbar;
    p.u = ctl.u;
    p.ubar = ctl.ubar;
    p.y = adj.Y;
    p.ybar = adj.Ybar;
    p.z = adj.Z;
    p.zbar = adj.Zbar;
    return p;
}

double stationarity_residual(const ProblemSpec& spec, const RiccatiSolution& sol,
                             const std::vector<StateSample>& states) {
    double worst = 0.0;
    for (const auto& s : states) {
        const auto p = optimal_point(spec, sol, s.t, s.x, s.xbar);
        worst = std::max(worst, max_abs(psi(p, spec)));
    }
    return worst;
}

AdjointPath reconstruct_adjoint(const ProblemSpec& spec, const RiccatiSolution& sol, const MeanPath& mean,
                                const PathEnsemble& paths, int path) {
    if (!paths.retained) throw MissingIncrements();
    const auto& grid = paths.grid;
    if (mean.m.size() != static_cast<std::size_t>(grid.nodes())) {
        throw DomainError("reconstruct_adjoint: mean path and ensemble use different grids");
    }
    AdjointPath out;
    out.grid = grid;
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    out.Y.resize(nodes);
    out.Ybar.resize(nodes);
    out.Z.resize(nodes);
    out.Zbar.resize(nodes);
    for (int k = 0; k < grid.nodes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double t = grid.t(k);
        const auto a = decouple_adjoint(spec, sol, paths.x_at(path, k), mean.m[kk], paths.u_at(path, k),
                                        paths.mean_u[kk], t);
        out.Y[kk] = a.Y;
        out.Ybar[kk] = a.Ybar;
        out.Z[kk] = a.Z;
        out.Zbar[kk] = a.Zbar;
    }
    return out;
}

BsdeDefect adjoint_bsde_residual(const ProblemSpec& spec, const RiccatiSolution& sol, const MeanPath& mean,
                                 const PathEnsemble& paths, int path) {
    if (!paths.retained || paths.dW.empty()) throw MissingIncrements();
    const auto adj = reconstruct_adjoint(spec, sol, mean, paths, path);
    const auto& grid = paths.grid;
    const double dt = grid.dt();
    double sum_sq = 0.0;
    for (int k = 0; k < grid.steps(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        HamiltonianPoint p;
        p.t = grid.t(k);
        p.x = paths.x_at(path, k);
        p.xbar = mean.m[kk];
        p.u = paths.u_at(path, k);
        p.ubar = paths.mean_u[kk];
        p.y = adj.Y[kk];
        p.ybar = adj.Ybar[kk];
        p.z = adj.Z[kk];
        p.zbar = adj.Zbar[kk];
        Vector defect = adj.Y[kk + 1] - adj.Y[kk] + dt * g_drift(p, spec);
        const Vector dw = paths.dw_at(path, k);
        for (int j = 0; j < paths.d; ++j) defect -= adj.Z[kk][static_cast<std::size_t>(j)] * dw(j);
        sum_sq += defect.squaredNorm();
    }
    const double steps = grid.steps();
    BsdeDefect out;
    out.rms = std::sqrt(sum_sq / steps);
    out.normalized_rms = std::sqrt(sum_sq / (steps * dt));
    return out;
}

}  // namespace mflq
