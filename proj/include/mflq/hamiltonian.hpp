#pragma once

#include "mflq/problem.hpp"
#include "mflq/riccati.hpp"
#include "mflq/simulation.hpp"

#include <vector>

namespace mflq {

/// A point of the optimality system; barred entries are expectations.
struct HamiltonianPoint {
    double t = 0.0;
    Vector x, xbar;
    Vector u, ubar;
    Vector y, ybar;
    std::vector<Vector> z, zbar;  // one per channel

    static HamiltonianPoint zero(const ProblemSpec& spec, double t = 0.0);
    HamiltonianPoint operator+(const HamiltonianPoint& o) const;
    HamiltonianPoint operator*(double s) const;
};

/// g = Qx + Qtilde xbar + Su + Stilde ubar + A'y + Atilde' ybar + sum_j (C_j' z_j + Ctilde_j' zbar_j).
Vector g_drift(const HamiltonianPoint& p, const ProblemSpec& spec);
/// Psi = S'x + Stilde' xbar + Ru + Rtilde ubar + B'y + Btilde' ybar + sum_j (D_j' z_j + Dtilde_j' zbar_j).
Vector psi(const HamiltonianPoint& p, const ProblemSpec& spec);

struct DecoupledAdjoint {
    Vector Y, Ybar;
    std::vector<Vector> Z, Zbar;
};

/// Y = P(x - xbar) + Phat xbar + phi, Z_j = P(C_j x + Ctilde_j xbar + D_j u + Dtilde_j ubar),
/// Ybar = Phat xbar + phi, Zbar_j = P(Chat_j xbar + Dhat_j ubar). phi enters only when
/// the cost has a linear terminal term. P, Phat, phi are interpolated linearly off-grid.
DecoupledAdjoint decouple_adjoint(const ProblemSpec& spec, const RiccatiSolution& sol, const Vector& x,
                                  const Vector& xbar, const Vector& u, const Vector& ubar, double t);

/// The optimal control at a state: u = Gamma(x - xbar) + GammaHat xbar + offset, with the
/// gains formed from P, Phat at t (not interpolated gains).
struct OptimalControl {
    Vector u, ubar;
};
OptimalControl optimal_control_at(const ProblemSpec& spec, const RiccatiSolution& sol, double t, const Vector& x,
                                  const Vector& xbar);

/// Assembles the full point (controls and adjoints) for a state sample.
HamiltonianPoint optimal_point(const ProblemSpec& spec, const RiccatiSolution& sol, double t, const Vector& x,
                               const Vector& xbar);

struct StateSample {
    double t = 0.0;
    Vector x, xbar;
};

/// Sup over samples of |Psi| (max-entry norm) at the assembled optimal point.
double stationarity_residual(const ProblemSpec& spec, const RiccatiSolution& sol,
                             const std::vector<StateSample>& states);

/// Adjoint pair reconstructed along one simulated path.
struct AdjointPath {
    TimeGrid grid{1.0, 1};
    std::vector<Vector> Y, Ybar;
    std::vector<std::vector<Vector>> Z, Zbar;  // [node][channel]
};

AdjointPath reconstruct_adjoint(const ProblemSpec& spec, const RiccatiSolution& sol, const MeanPath& mean,
                                const PathEnsemble& paths, int path = 0);

struct BsdeDefect {
    /// sqrt(mean_k |d_k|^2 / dt): defect normalized by the Brownian scale sqrt(dt); first order in dt.
    double normalized_rms = 0.0;
    /// sqrt(mean_k |d_k|^2): plain per-step root-mean-square.
    double rms = 0.0;
};

/// d_k = Y_{k+1} - Y_k + g_k dt - sum_j Z_{j,k} dW_{j,k} along one retained path.
BsdeDefect adjoint_bsde_residual(const ProblemSpec& spec, const RiccatiSolution& sol, const MeanPath& mean,
                                 const PathEnsemble& paths, int path = 0);

}  // namespace mflq
