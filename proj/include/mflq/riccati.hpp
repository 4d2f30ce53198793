#pragma once

#include "mflq/problem.hpp"

#include <optional>
#include <vector>

namespace mflq {

/// Gain denominators with smallest eigenvalue at or below this are numerically singular.
inline constexpr double kMarginFloor = 1e-10;

struct RiccatiSolution {
    TimeGrid grid{1.0, 1};
    std::vector<SymMatrix> P, Phat;
    /// Right-hand sides at the nodes; used for cubic Hermite interpolation at half-steps.
    std::vector<SymMatrix> Pdot, Phatdot;
    std::optional<std::vector<Vector>> phi;
    std::vector<Matrix> Gamma, GammaHat;
    /// <Phat(0) x0, x0>; only set when the cost has no linear terminal term.
    std::optional<double> value0;
    /// Smallest eigenvalues of sum_j D_j' P D_j + R and of its hatted counterpart, per node.
    std::vector<double> margin, margin_hat;

    /// Linear interpolation between nodes (exact at nodes).
    SymMatrix P_at(double t) const;
    SymMatrix Phat_at(double t) const;
    /// Zero vector when phi is absent.
    Vector phi_at(double t, int n) const;
    /// Cubic Hermite midpoint of step k (between nodes k and k+1).
    SymMatrix P_mid(int k) const;
    SymMatrix Phat_mid(int k) const;
};

/// Denominator, numerator and gain at one time: Gamma = -N^{-1} L'.
struct GainTerms {
    Matrix N;       // m x m
    Matrix L;       // n x m
    Matrix Gamma;   // m x n
    double margin;  // smallest eigenvalue of N
};

/// N = sum_j D_j' P D_j + R, L = P B + sum_j C_j' P D_j + S.
GainTerms gain_terms(const PointCoefficients& pc, const Matrix& P, double floor = 0.0, const char* which = "N");
/// Nhat = sum_j Dhat_j' P Dhat_j + Rhat, Lhat = Phat Bhat + sum_j Chat_j' P Dhat_j + Shat.
GainTerms gain_terms_hat(const PointCoefficients& pc, const Matrix& P, const Matrix& Phat, double floor = 0.0,
                         const char* which = "Nhat");

/// Throws SingularGainDenominator when the denominator margin is <= 0.
Matrix gain_gamma(double t, const SymMatrix& P, const ProblemSpec& spec);
Matrix gain_gamma_hat(double t, const SymMatrix& P, const SymMatrix& Phat, const ProblemSpec& spec);

/// dP/dt at (t, P).
Matrix riccati_rhs(const PointCoefficients& pc, const Matrix& P, double floor, double* margin = nullptr);
/// dPhat/dt at (t, P, Phat).
Matrix riccati_hat_rhs(const PointCoefficients& pc, const Matrix& P, const Matrix& Phat, double floor,
                       double* margin = nullptr);

struct RiccatiOptions {
    double margin_floor = kMarginFloor;
};

/// Backward RK4 for P, then for Phat with P at half-steps from cubic Hermite
/// interpolation; fills gains, margins, value0, and phi when ell is present.
RiccatiSolution solve_riccati(const ProblemSpec& spec, const TimeGrid& grid, const RiccatiOptions& opts = {});

/// Backward RK4 for phi' = -(Ahat + Bhat GammaHat)' phi, phi(T) = ell. Stores into sol.phi.
const std::vector<Vector>& solve_phi(const ProblemSpec& spec, RiccatiSolution& sol,
                                     double margin_floor = kMarginFloor);

/// -[sum_j Dhat_j' P Dhat_j + Rhat]^{-1} Bhat' phi(t).
Vector feedback_offset(double t, const RiccatiSolution& sol, const ProblemSpec& spec);

struct RiccatiResidual {
    double P = 0.0;
    double Phat = 0.0;
    double phi = 0.0;
};

/// Sup over interior nodes of |central difference - right-hand side| (max-entry norm).
RiccatiResidual riccati_residual(const ProblemSpec& spec, const RiccatiSolution& sol);

/// Wraps externally supplied node values (e.g. closed forms) as a solution:
/// fills derivatives, gains, margins and value0 from the spec.
RiccatiSolution solution_from_nodes(const ProblemSpec& spec, const TimeGrid& grid, std::vector<SymMatrix> P,
                                    std::vector<SymMatrix> Phat, std::optional<std::vector<Vector>> phi = {});

struct BackwardEulerSolution {
    TimeGrid grid{1.0, 1};
    std::vector<SymMatrix> P, Phat;
};

/// First-order implicit (backward) Euler reference, each implicit step solved by
/// fixed-point iteration. Stores every node, so very fine grids cost memory.
BackwardEulerSolution solve_riccati_backward_euler(const ProblemSpec& spec, const TimeGrid& grid,
                                                   double margin_floor = kMarginFloor);

}  // namespace mflq
