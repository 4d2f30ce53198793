#include "mflq/simulation.hpp"

#include "mflq/errors.hpp"
#include "mflq/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace mflq {

FeedbackLaw FeedbackLaw::zero(int n, int m) {
    return {TimeFunctionMatrix::zero(m, n), TimeFunctionMatrix::zero(m, n), TimeFunctionMatrix::zero(m, 1)};
}

void check_law(const ProblemSpec& spec, const FeedbackLaw& law) {
    const int n = spec.n();
    const int m = spec.m();
    if (law.Theta.empty() || law.Theta.rows() != m || law.Theta.cols() != n) {
        throw InvalidMatrix("feedback law: Theta must be " + std::to_string(m) + "x" + std::to_string(n));
    }
    if (law.ThetaHat.empty() || law.ThetaHat.rows() != m || law.ThetaHat.cols() != n) {
        throw InvalidMatrix("feedback law: ThetaHat must be " + std::to_string(m) + "x" + std::to_string(n));
    }
    if (law.c.empty() || law.c.rows() != m || law.c.cols() != 1) {
        throw InvalidMatrix("feedback law: c must be a length-" + std::to_string(m) + " vector");
    }
}

FeedbackLaw optimal_feedback_law(const ProblemSpec& spec, const RiccatiSolution& sol) {
    const auto& grid = sol.grid;
    std::vector<Matrix> c;
    c.reserve(static_cast<std::size_t>(grid.nodes()));
    for (int k = 0; k < grid.nodes(); ++k) {
        c.push_back(sol.phi ? Matrix(feedback_offset(grid.t(k), sol, spec)) : Matrix::Zero(spec.m(), 1));
    }
    return {TimeFunctionMatrix::sampled(grid.horizon(), sol.Gamma),
            TimeFunctionMatrix::sampled(grid.horizon(), sol.GammaHat),
            TimeFunctionMatrix::sampled(grid.horizon(), std::move(c))};
}

namespace {

/// Law evaluated at the half-step points of a grid.
struct LawTable {
    std::vector<Matrix> Theta, ThetaHat;
    std::vector<Vector> c;

    LawTable(const FeedbackLaw& law, const TimeGrid& grid) {
        const TimeGrid half = grid.refined(2);
        const auto count = static_cast<std::size_t>(half.nodes());
        Theta.reserve(count);
        ThetaHat.reserve(count);
        c.reserve(count);
        for (int i = 0; i < half.nodes(); ++i) {
            const double t = half.t(i);
            Theta.push_back(law.Theta(t));
            ThetaHat.push_back(law.ThetaHat(t));
            c.push_back(law.c(t).col(0));
        }
    }
};

void check_grid(const ProblemSpec& spec, const TimeGrid& grid) {
    if (std::abs(grid.horizon() - spec.T) > 1e-12 * std::max(1.0, spec.T)) {
        throw DomainError("grid horizon differs from problem horizon");
    }
}

Vector mean_rhs(const PointCoefficients& pc, const Matrix& ThetaHat, const Vector& c, const Vector& m) {
    return pc.Ahat * m + pc.Bhat * (ThetaHat * m + c);
}

}  // namespace

MeanPath propagate_mean(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid) {
    check_law(spec, law);
    check_grid(spec, grid);
    const CoefficientTable table(spec, grid);
    const LawTable lt(law, grid);
    const double h = grid.dt();
    MeanPath out;
    out.grid = grid;
    out.m.resize(static_cast<std::size_t>(grid.nodes()));
    out.m[0] = spec.x0;
    for (int k = 0; k < grid.steps(); ++k) {
        const auto a = static_cast<std::size_t>(2 * k);
        const Vector& y = out.m[static_cast<std::size_t>(k)];
        const Vector k1 = mean_rhs(table.at_half(2 * k), lt.ThetaHat[a], lt.c[a], y);
        const Vector k2 = mean_rhs(table.at_half(2 * k + 1), lt.ThetaHat[a + 1], lt.c[a + 1], y + 0.5 * h * k1);
        const Vector k3 = mean_rhs(table.at_half(2 * k + 1), lt.ThetaHat[a + 1], lt.c[a + 1], y + 0.5 * h * k2);
        const Vector k4 = mean_rhs(table.at_half(2 * k + 2), lt.ThetaHat[a + 2], lt.c[a + 2], y + h * k3);
        out.m[static_cast<std::size_t>(k + 1)] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

namespace {

struct MomentDerivative {
    Vector dm;
    Matrix dV;
    double dcost;
};

MomentDerivative moment_rhs(const PointCoefficients& pc, const Matrix& Theta, const Matrix& ThetaHat, const Vector& c,
                            const Vector& m, const Matrix& V) {
    MomentDerivative out;
    const Vector u2 = ThetaHat * m + c;
    out.dm = pc.Ahat * m + pc.Bhat * u2;
    const Matrix Acl = pc.A + pc.B * Theta;
    Matrix dV = Acl * V;
    dV += dV.transpose().eval();
    for (std::size_t j = 0; j < pc.C.size(); ++j) {
        const Matrix M = pc.C[j] + pc.D[j] * Theta;
        const Vector v = pc.Chat[j] * m + pc.Dhat[j] * u2;
        dV.noalias() += M * V * M.transpose();
        dV.noalias() += v * v.transpose();
    }
    out.dV = 0.5 * (dV + dV.transpose());
    const Matrix ST = pc.S * Theta;
    const Matrix W = pc.Q + ST + ST.transpose() + Theta.transpose() * pc.R * Theta;
    out.dcost = (W.cwiseProduct(V)).sum() + m.dot(pc.Qhat * m) + 2.0 * m.dot(pc.Shat * u2) + u2.dot(pc.Rhat * u2);
    return out;
}

}  // namespace

MomentState propagate_moments(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid) {
    check_law(spec, law);
    check_grid(spec, grid);
    const CoefficientTable table(spec, grid);
    const LawTable lt(law, grid);
    const double h = grid.dt();
    const int n = spec.n();
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    MomentState out;
    out.grid = grid;
    out.m.resize(nodes);
    out.V.resize(nodes);
    out.runningCost.resize(nodes);
    out.m[0] = spec.x0;
    out.V[0] = SymMatrix::zero(n);
    out.runningCost[0] = 0.0;
    Matrix V = Matrix::Zero(n, n);
    for (int k = 0; k < grid.steps(); ++k) {
        const auto a = static_cast<std::size_t>(2 * k);
        const Vector& m = out.m[static_cast<std::size_t>(k)];
        const auto& p0 = table.at_half(2 * k);
        const auto& pm = table.at_half(2 * k + 1);
        const auto& p1 = table.at_half(2 * k + 2);
        const auto k1 = moment_rhs(p0, lt.Theta[a], lt.ThetaHat[a], lt.c[a], m, V);
        const auto k2 = moment_rhs(pm, lt.Theta[a + 1], lt.ThetaHat[a + 1], lt.c[a + 1], m + 0.5 * h * k1.dm,
                                   V + 0.5 * h * k1.dV);
        const auto k3 = moment_rhs(pm, lt.Theta[a + 1], lt.ThetaHat[a + 1], lt.c[a + 1], m + 0.5 * h * k2.dm,
                                   V + 0.5 * h * k2.dV);
        const auto k4 =
            moment_rhs(p1, lt.Theta[a + 2], lt.ThetaHat[a + 2], lt.c[a + 2], m + h * k3.dm, V + h * k3.dV);
        const auto next = static_cast<std::size_t>(k + 1);
        out.m[next] = m + (h / 6.0) * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
        V += (h / 6.0) * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV);
        out.V[next] = SymMatrix(V);
        out.runningCost[next] =
            out.runningCost[next - 1] + (h / 6.0) * (k1.dcost + 2.0 * k2.dcost + 2.0 * k3.dcost + k4.dcost);
    }
    const Vector& mT = out.m.back();
    double terminal = (spec.weights.G.matrix().cwiseProduct(V)).sum() + mT.dot(terminal_hat(spec).matrix() * mT);
    if (spec.weights.ell) terminal += 2.0 * spec.weights.ell->dot(mT);
    out.totalCost = out.runningCost.back() + terminal;
    return out;
}

Vector PathEnsemble::x_at(int p, int k) const {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = x(p, k, i);
    return v;
}

Vector PathEnsemble::u_at(int p, int k) const {
    Vector v(m);
    for (int i = 0; i < m; ++i) v(i) = u(p, k, i);
    return v;
}

Vector PathEnsemble::dw_at(int p, int k) const {
    if (!retained || dW.empty()) throw MissingIncrements();
    Vector v(d);
    for (int j = 0; j < d; ++j) v(j) = dw(p, k, j);
    return v;
}

namespace {

/// Everything the Euler-Maruyama update at one node needs, with the mean-field
/// arguments folded into constant vectors.
struct NodeConstants {
    Matrix A, B, Theta;
    std::vector<Matrix> C, D;
    Vector u_offset;   // (ThetaHat - Theta) xbar + c
    Vector drift_c;    // Atilde xbar + Btilde ubar
    std::vector<Vector> diff_c;  // Ctilde_j xbar + Dtilde_j ubar
    // cost weights
    Matrix Q, S, R;
    double mean_cost = 0.0;  // <Qtilde xbar, xbar> + 2<Stilde ubar, xbar> + <Rtilde ubar, ubar>
};

NodeConstants node_constants(const PointCoefficients& pc, const Matrix& Theta, const Matrix& ThetaHat,
                             const Vector& c, const Vector& xbar, Vector& ubar) {
    NodeConstants nc;
    nc.A = pc.A;
    nc.B = pc.B;
    nc.Theta = Theta;
    nc.C = pc.C;
    nc.D = pc.D;
    ubar = ThetaHat * xbar + c;
    nc.u_offset = (ThetaHat - Theta) * xbar + c;
    nc.drift_c = pc.Atilde * xbar + pc.Btilde * ubar;
    nc.diff_c.resize(pc.C.size());
    for (std::size_t j = 0; j < pc.C.size(); ++j) nc.diff_c[j] = pc.Ctilde[j] * xbar + pc.Dtilde[j] * ubar;
    nc.Q = pc.Q;
    nc.S = pc.S;
    nc.R = pc.R;
    nc.mean_cost = xbar.dot(pc.Qtilde * xbar) + 2.0 * xbar.dot(pc.Stilde * ubar) + ubar.dot(pc.Rtilde * ubar);
    return nc;
}

/// Control at a node: u = Theta x + u_offset.
inline void control(const NodeConstants& nc, int n, int m, const double* x, double* u) {
    const double* Th = nc.Theta.data();
    for (int i = 0; i < m; ++i) {
        double s = nc.u_offset[i];
        for (int l = 0; l < n; ++l) s += Th[i + l * m] * x[l];
        u[i] = s;
    }
}

/// x_next = x + [A x + B u + drift_c] dt + sum_j [C_j x + D_j u + diff_c_j] dw_j.
inline void euler_step(const NodeConstants& nc, int n, int m, int d, double dt, const double* x, const double* u,
                       const double* dw, double* x_next) {
    const double* A = nc.A.data();
    const double* B = nc.B.data();
    for (int i = 0; i < n; ++i) {
        double s = nc.drift_c[i];
        for (int l = 0; l < n; ++l) s += A[i + l * n] * x[l];
        for (int l = 0; l < m; ++l) s += B[i + l * n] * u[l];
        x_next[i] = x[i] + s * dt;
    }
    for (int j = 0; j < d; ++j) {
        const double* C = nc.C[static_cast<std::size_t>(j)].data();
        const double* D = nc.D[static_cast<std::size_t>(j)].data();
        const Vector& g0 = nc.diff_c[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            double s = g0[i];
            for (int l = 0; l < n; ++l) s += C[i + l * n] * x[l];
            for (int l = 0; l < m; ++l) s += D[i + l * n] * u[l];
            x_next[i] += s * dw[j];
        }
    }
}

/// <Qx,x> + 2<Su,x> + <Ru,u> + mean terms.
inline double running_cost(const NodeConstants& nc, int n, int m, const double* x, const double* u) {
    const double* Q = nc.Q.data();
    const double* S = nc.S.data();
    const double* R = nc.R.data();
    double s = nc.mean_cost;
    for (int i = 0; i < n; ++i) {
        double qi = 0.0;
        for (int l = 0; l < n; ++l) qi += Q[i + l * n] * x[l];
        for (int l = 0; l < m; ++l) qi += 2.0 * S[i + l * n] * u[l];
        s += qi * x[i];
    }
    for (int i = 0; i < m; ++i) {
        double ri = 0.0;
        for (int l = 0; l < m; ++l) ri += R[i + l * m] * u[l];
        s += ri * u[i];
    }
    return s;
}

struct TerminalConstants {
    Matrix G;
    double mean_cost = 0.0;  // <Gtilde xbar, xbar> + 2<ell, xbar>
};

TerminalConstants terminal_constants(const ProblemSpec& spec, const Vector& xbar) {
    TerminalConstants tc;
    tc.G = spec.weights.G.matrix();
    tc.mean_cost = xbar.dot(spec.weights.Gtilde.matrix() * xbar);
    if (spec.weights.ell) tc.mean_cost += 2.0 * spec.weights.ell->dot(xbar);
    return tc;
}

inline double terminal_cost(const TerminalConstants& tc, int n, const double* x) {
    const double* G = tc.G.data();
    double s = tc.mean_cost;
    for (int i = 0; i < n; ++i) {
        double gi = 0.0;
        for (int l = 0; l < n; ++l) gi += G[i + l * n] * x[l];
        s += gi * x[i];
    }
    return s;
}

void finish_cost(PathEnsemble& e) {
    const double N = e.N;
    double sum = 0.0;
    for (double c : e.path_cost) sum += c;
    const double mean = sum / N;
    double ss = 0.0;
    for (double c : e.path_cost) ss += (c - mean) * (c - mean);
    e.costEstimate = mean;
    e.costStdErr = e.N > 1 ? std::sqrt(ss / (N - 1.0) / N) : 0.0;
}

PathEnsemble make_ensemble(const ProblemSpec& spec, const TimeGrid& grid, int N, std::uint64_t seed,
                           MeanFieldMode mode, bool retain) {
    PathEnsemble e;
    e.grid = grid;
    e.N = N;
    e.n = spec.n();
    e.m = spec.m();
    e.d = spec.d();
    e.seed = seed;
    e.mode = mode;
    e.retained = retain;
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    const auto NN = static_cast<std::size_t>(N);
    if (retain) {
        e.X.assign(NN * nodes * static_cast<std::size_t>(e.n), 0.0);
        e.U.assign(NN * nodes * static_cast<std::size_t>(e.m), 0.0);
        e.dW.assign(NN * static_cast<std::size_t>(grid.steps()) * static_cast<std::size_t>(e.d), 0.0);
    }
    e.path_cost.assign(NN, 0.0);
    e.emp_mean.assign(nodes, Vector::Zero(e.n));
    e.emp_var.assign(nodes, Vector::Zero(e.n));
    return e;
}

/// Per-node constants for exact-mean mode.
struct ExactSetup {
    std::vector<NodeConstants> nodes;
    TerminalConstants terminal;
    std::vector<Vector> mean_x, mean_u;
};

ExactSetup exact_setup(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid) {
    ExactSetup s;
    const MeanPath mp = propagate_mean(spec, law, grid);
    const CoefficientTable table(spec, grid);
    s.mean_x = mp.m;
    s.mean_u.resize(mp.m.size());
    s.nodes.reserve(mp.m.size());
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.t(k);
        const auto i = static_cast<std::size_t>(k);
        s.nodes.push_back(
            node_constants(table.at_node(k), law.Theta(t), law.ThetaHat(t), law.c(t).col(0), mp.m[i], s.mean_u[i]));
    }
    s.terminal = terminal_constants(spec, mp.m.back());
    return s;
}

/// Block of paths processed as a unit; partial sums are reduced in block order
/// so results do not depend on the thread count.
constexpr int kBlock = 256;

struct BlockSums {
    std::vector<double> dev_sum;  // nodes * n, sum of (x - mean_x)
    std::vector<double> dev_sq;   // nodes * n, sum of (x - mean_x)^2
};

/// Runs one path in exact-mean mode. dw_source(step, out) provides the increments.
template <typename DwSource>
double run_exact_path(const ExactSetup& s, const TimeGrid& grid, int n, int m, int d, const Vector& x0,
                      DwSource&& dw_source, double* X, double* U, double* dW, BlockSums& sums) {
    const int steps = grid.steps();
    const double dt = grid.dt();
    std::vector<double> x(x0.data(), x0.data() + n), x_next(static_cast<std::size_t>(n)),
        u(static_cast<std::size_t>(m)), dw(static_cast<std::size_t>(d));
    double cost = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const auto& nc = s.nodes[static_cast<std::size_t>(k)];
        control(nc, n, m, x.data(), u.data());
        const Vector& mk = s.mean_x[static_cast<std::size_t>(k)];
        for (int i = 0; i < n; ++i) {
            const double dev = x[static_cast<std::size_t>(i)] - mk[i];
            sums.dev_sum[static_cast<std::size_t>(k * n + i)] += dev;
            sums.dev_sq[static_cast<std::size_t>(k * n + i)] += dev * dev;
        }
        if (X) std::copy(x.begin(), x.end(), X + static_cast<std::ptrdiff_t>(k) * n);
        if (U) std::copy(u.begin(), u.end(), U + static_cast<std::ptrdiff_t>(k) * m);
        if (k == steps) break;
        cost += dt * running_cost(nc, n, m, x.data(), u.data());
        dw_source(k, dw.data());
        if (dW) std::copy(dw.begin(), dw.end(), dW + static_cast<std::ptrdiff_t>(k) * d);
        euler_step(nc, n, m, d, dt, x.data(), u.data(), dw.data(), x_next.data());
        std::swap(x, x_next);
    }
    return cost + terminal_cost(s.terminal, n, x.data());
}

void summarize(PathEnsemble& e, const std::vector<Vector>& center, const BlockSums& total) {
    const double N = e.N;
    for (int k = 0; k < e.grid.nodes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        for (int i = 0; i < e.n; ++i) {
            const auto idx = static_cast<std::size_t>(k * e.n + i);
            const double md = total.dev_sum[idx] / N;
            e.emp_mean[kk](i) = center[kk](i) + md;
            e.emp_var[kk](i) = e.N > 1 ? std::max(0.0, (total.dev_sq[idx] - N * md * md) / (N - 1.0)) : 0.0;
        }
    }
}

}  // namespace

PathEnsemble simulate_paths(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid, int N,
                            std::uint64_t seed, const SimulationOptions& opts) {
    if (N < 1) throw DomainError("simulate_paths: need at least one path");
    const ExactSetup s = exact_setup(spec, law, grid);
    PathEnsemble e = make_ensemble(spec, grid, N, seed, MeanFieldMode::ExactMean, opts.retain_paths);
    e.mean_x = s.mean_x;
    e.mean_u = s.mean_u;
    const int n = e.n, m = e.m, d = e.d;
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    const auto steps = static_cast<std::size_t>(grid.steps());
    const NormalStream rng(seed);
    const double sqdt = std::sqrt(grid.dt());

    const int blocks = (N + kBlock - 1) / kBlock;
    std::vector<BlockSums> partial(static_cast<std::size_t>(blocks));
    std::atomic<int> next_block{0};
    auto worker = [&] {
        for (int b = next_block++; b < blocks; b = next_block++) {
            auto& sums = partial[static_cast<std::size_t>(b)];
            sums.dev_sum.assign(nodes * static_cast<std::size_t>(n), 0.0);
            sums.dev_sq.assign(nodes * static_cast<std::size_t>(n), 0.0);
            const int p_end = std::min(N, (b + 1) * kBlock);
            for (int p = b * kBlock; p < p_end; ++p) {
                const auto pp = static_cast<std::size_t>(p);
                double* X = e.retained ? e.X.data() + pp * nodes * static_cast<std::size_t>(n) : nullptr;
                double* U = e.retained ? e.U.data() + pp * nodes * static_cast<std::size_t>(m) : nullptr;
                double* dW = e.retained ? e.dW.data() + pp * steps * static_cast<std::size_t>(d) : nullptr;
                auto source = [&](int k, double* dw) {
                    rng.fill(static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(k), d, dw);
                    for (int j = 0; j < d; ++j) dw[j] *= sqdt;
                };
                e.path_cost[pp] = run_exact_path(s, grid, n, m, d, spec.x0, source, X, U, dW, sums);
            }
        }
    };
    const int threads = std::max(1, std::min(opts.threads, blocks));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    BlockSums total;
    total.dev_sum.assign(nodes * static_cast<std::size_t>(n), 0.0);
    total.dev_sq.assign(nodes * static_cast<std::size_t>(n), 0.0);
    for (const auto& b : partial) {
        for (std::size_t i = 0; i < total.dev_sum.size(); ++i) {
            total.dev_sum[i] += b.dev_sum[i];
            total.dev_sq[i] += b.dev_sq[i];
        }
    }
    summarize(e, s.mean_x, total);
    finish_cost(e);
    return e;
}

PathEnsemble simulate_path_with_increments(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid,
                                           const std::vector<double>& dW) {
    const int d = spec.d();
    if (dW.size() != static_cast<std::size_t>(grid.steps()) * static_cast<std::size_t>(d)) {
        throw DomainError("simulate_path_with_increments: expected steps*d increments");
    }
    const ExactSetup s = exact_setup(spec, law, grid);
    PathEnsemble e = make_ensemble(spec, grid, 1, 0, MeanFieldMode::ExactMean, true);
    e.mean_x = s.mean_x;
    e.mean_u = s.mean_u;
    BlockSums sums;
    sums.dev_sum.assign(static_cast<std::size_t>(grid.nodes() * e.n), 0.0);
    sums.dev_sq.assign(sums.dev_sum.size(), 0.0);
    auto source = [&](int k, double* dw) {
        std::copy(dW.begin() + static_cast<std::ptrdiff_t>(k) * d, dW.begin() + static_cast<std::ptrdiff_t>(k + 1) * d,
                  dw);
    };
    e.path_cost[0] = run_exact_path(s, grid, e.n, e.m, d, spec.x0, source, e.X.data(), e.U.data(), e.dW.data(), sums);
    summarize(e, s.mean_x, sums);
    finish_cost(e);
    return e;
}

std::vector<double> coarsen_increments(const std::vector<double>& dW, int steps, int d, int factor) {
    if (factor < 1 || steps % factor != 0) throw DomainError("coarsen_increments: factor must divide steps");
    if (dW.size() != static_cast<std::size_t>(steps) * static_cast<std::size_t>(d)) {
        throw DomainError("coarsen_increments: expected steps*d increments");
    }
    const int coarse = steps / factor;
    std::vector<double> out(static_cast<std::size_t>(coarse) * static_cast<std::size_t>(d), 0.0);
    for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < d; ++j) {
            out[static_cast<std::size_t>((k / factor) * d + j)] += dW[static_cast<std::size_t>(k * d + j)];
        }
    }
    return out;
}

PathEnsemble simulate_particle_system(const ProblemSpec& spec, const FeedbackLaw& law, const TimeGrid& grid, int N,
                                      std::uint64_t seed, const SimulationOptions& opts) {
    if (N < 2) throw DomainError("simulate_particle_system: need at least two particles");
    check_law(spec, law);
    check_grid(spec, grid);
    PathEnsemble e = make_ensemble(spec, grid, N, seed, MeanFieldMode::Particle, opts.retain_paths);
    const int n = e.n, m = e.m, d = e.d;
    const int steps = grid.steps();
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    const auto NN = static_cast<std::size_t>(N);
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    const CoefficientTable table(spec, grid);
    const NormalStream rng(seed);

    std::vector<double> x(NN * static_cast<std::size_t>(n)), x_next(x.size()), u(NN * static_cast<std::size_t>(m)),
        dw(static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < NN; ++p) {
        for (int i = 0; i < n; ++i) x[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = spec.x0(i);
    }
    e.mean_x.resize(nodes);
    e.mean_u.resize(nodes);
    for (int k = 0; k <= steps; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        Vector xbar = Vector::Zero(n);
        for (std::size_t p = 0; p < NN; ++p) {
            for (int i = 0; i < n; ++i) xbar(i) += x[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
        }
        xbar /= static_cast<double>(N);
        Vector var = Vector::Zero(n);
        for (std::size_t p = 0; p < NN; ++p) {
            for (int i = 0; i < n; ++i) {
                const double dev = x[p * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] - xbar(i);
                var(i) += dev * dev;
            }
        }
        e.emp_mean[kk] = xbar;
        e.emp_var[kk] = var / static_cast<double>(N - 1);
        const double t = grid.t(k);
        Vector ubar;
        const NodeConstants nc = node_constants(table.at_node(k), law.Theta(t), law.ThetaHat(t), law.c(t).col(0),
                                                xbar, ubar);
        e.mean_x[kk] = xbar;
        e.mean_u[kk] = ubar;
        const TerminalConstants tc = k == steps ? terminal_constants(spec, xbar) : TerminalConstants{};
        for (std::size_t p = 0; p < NN; ++p) {
            double* xp = x.data() + p * static_cast<std::size_t>(n);
            double* up = u.data() + p * static_cast<std::size_t>(m);
            control(nc, n, m, xp, up);
            if (e.retained) {
                std::copy(xp, xp + n, e.X.data() + (p * nodes + kk) * static_cast<std::size_t>(n));
                std::copy(up, up + m, e.U.data() + (p * nodes + kk) * static_cast<std::size_t>(m));
            }
            if (k == steps) {
                e.path_cost[p] += terminal_cost(tc, n, xp);
                continue;
            }
            e.path_cost[p] += dt * running_cost(nc, n, m, xp, up);
            rng.fill(p, static_cast<std::uint32_t>(k), d, dw.data());
            for (int j = 0; j < d; ++j) dw[static_cast<std::size_t>(j)] *= sqdt;
            if (e.retained) {
                std::copy(dw.begin(), dw.end(),
                          e.dW.data() + (p * static_cast<std::size_t>(steps) + kk) * static_cast<std::size_t>(d));
            }
            euler_step(nc, n, m, d, dt, xp, up, dw.data(), x_next.data() + p * static_cast<std::size_t>(n));
        }
        if (k < steps) std::swap(x, x_next);
    }
    finish_cost(e);
    return e;
}

CostEstimate estimate_cost(const PathEnsemble& e, const ProblemSpec& spec) {
    if (!e.retained) return {e.costEstimate, e.costStdErr};
    const auto& grid = e.grid;
    const int steps = grid.steps();
    const double dt = grid.dt();
    const CoefficientTable table(spec, grid);
    std::vector<NodeConstants> nodes;
    nodes.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k) {
        const auto& pc = table.at_node(k);
        const auto kk = static_cast<std::size_t>(k);
        NodeConstants nc;
        nc.Q = pc.Q;
        nc.S = pc.S;
        nc.R = pc.R;
        const Vector& xbar = e.mean_x[kk];
        const Vector& ubar = e.mean_u[kk];
        nc.mean_cost = xbar.dot(pc.Qtilde * xbar) + 2.0 * xbar.dot(pc.Stilde * ubar) + ubar.dot(pc.Rtilde * ubar);
        nodes.push_back(std::move(nc));
    }
    const TerminalConstants tc = terminal_constants(spec, e.mean_x.back());
    PathEnsemble tmp;
    tmp.N = e.N;
    tmp.path_cost.resize(static_cast<std::size_t>(e.N));
    const auto nn = static_cast<std::size_t>(grid.nodes());
    for (int p = 0; p < e.N; ++p) {
        const auto pp = static_cast<std::size_t>(p);
        double cost = 0.0;
        for (int k = 0; k < steps; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            cost += dt * running_cost(nodes[kk], e.n, e.m, e.X.data() + (pp * nn + kk) * static_cast<std::size_t>(e.n),
                                      e.U.data() + (pp * nn + kk) * static_cast<std::size_t>(e.m));
        }
        cost += terminal_cost(tc, e.n, e.X.data() + (pp * nn + nn - 1) * static_cast<std::size_t>(e.n));
        tmp.path_cost[pp] = cost;
    }
    finish_cost(tmp);
    return {tmp.costEstimate, tmp.costStdErr};
}

}  // namespace mflq
