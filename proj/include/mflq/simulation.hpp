#pragma once

#include "mflq/problem.hpp"
#include "mflq/riccati.hpp"

#include <cstdint>
#include <vector>

namespace mflq {

/// u(t) = Theta(t)(X - EX) + ThetaHat(t) EX + c(t), so Eu(t) = ThetaHat(t) EX + c(t).
struct FeedbackLaw {
    TimeFunctionMatrix Theta;     // m x n
    TimeFunctionMatrix ThetaHat;  // m x n
    TimeFunctionMatrix c;         // m x 1

    static FeedbackLaw zero(int n, int m);
};

/// Optimal law sampled at the solution's nodes: Theta = Gamma, ThetaHat = GammaHat,
/// c = feedback offset (zero without a linear terminal term).
FeedbackLaw optimal_feedback_law(const ProblemSpec& spec, const RiccatiSolution& sol);

/// Throws InvalidMatrix when the law's shapes do not fit the spec.
void check_law(const ProblemSpec& spec, const FeedbackLaw& law);

struct MeanPath {
    TimeGrid grid{1.0, 1};
    std::vector<Vector> m;
};

struct MomentState {
    TimeGrid grid{1.0, 1};
    std::vector<Vector> m;
    std::vector<SymMatrix> V;
    /// Integral of the running cost from 0 to each node.
    std::vector<double> runningCost;
    double totalCost = 0.0;
};

/// RK4 for m' = Ahat m + Bhat (ThetaHat m + c), m(0) = x0.
MeanPath propagate_mean(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid);

/// Joint RK4 for mean, covariance and accumulated cost; the total includes the
/// terminal terms tr(G V(T)) + <Ghat m(T), m(T)> + 2<ell, m(T)>.
MomentState propagate_moments(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid);

enum class MeanFieldMode { ExactMean, Particle };

struct SimulationOptions {
    /// Keep X, U and dW for every path; otherwise only summaries and per-path costs.
    bool retain_paths = true;
    /// Worker threads for exact-mean mode; results do not depend on this.
    int threads = 1;
};

/// Euler-Maruyama sample paths. Array layouts (row-major):
///   X[(p * nodes + k) * n + i], U[(p * nodes + k) * m + i], dW[(p * steps + k) * d + j].
/// dW holds the increment over step k, so it has `steps` rows per path.
struct PathEnsemble {
    TimeGrid grid{1.0, 1};
    int N = 0;
    int n = 0;
    int m = 0;
    int d = 0;
    std::uint64_t seed = 0;
    MeanFieldMode mode = MeanFieldMode::ExactMean;
    bool retained = false;
    std::vector<double> X, U, dW;
    /// Mean-field arguments used by the scheme at each node (exact or empirical).
    std::vector<Vector> mean_x, mean_u;
    /// Per-node empirical mean and variance (diagonal) of X over the paths.
    std::vector<Vector> emp_mean, emp_var;
    std::vector<double> path_cost;
    double costEstimate = 0.0;
    double costStdErr = 0.0;

    double x(int p, int k, int i) const {
        return X[(static_cast<std::size_t>(p) * grid.nodes() + k) * n + i];
    }
    double u(int p, int k, int i) const {
        return U[(static_cast<std::size_t>(p) * grid.nodes() + k) * m + i];
    }
    double dw(int p, int k, int j) const {
        return dW[(static_cast<std::size_t>(p) * grid.steps() + k) * d + j];
    }
    Vector x_at(int p, int k) const;
    Vector u_at(int p, int k) const;
    Vector dw_at(int p, int k) const;
};

/// Exact-mean mode: the mean-field arguments come from propagate_mean.
PathEnsemble simulate_paths(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid, int N,
                            std::uint64_t seed, const SimulationOptions& opts = {});

/// Interacting particles: the mean-field arguments are empirical averages over the N particles.
PathEnsemble simulate_particle_system(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid, int N,
                                      std::uint64_t seed, const SimulationOptions& opts = {});

/// One exact-mean path driven by caller-supplied increments dW[k * d + j], k < steps.
PathEnsemble simulate_path_with_increments(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid,
                                           const std::vector<double>& dW);

/// Sums consecutive groups of `factor` steps: increments of the same Brownian
/// path on a grid with steps/factor steps.
std::vector<double> coarsen_increments(const std::vector<double>& dW, int steps, int d, int factor);

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Left-endpoint quadrature of the running cost per path, exact terminal terms,
/// mean terms against the ensemble's stored mean-field arguments.
CostEstimate estimate_cost(const PathEnsemble& ensemble, const ProblemSpec& spec);

}  // namespace mflq
