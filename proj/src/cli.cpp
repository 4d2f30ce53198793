#include "mflq/cli.hpp"

#include "mflq/compensator.hpp"
#include "mflq/errors.hpp"
#include "mflq/examples.hpp"
#include "mflq/export.hpp"
#include "mflq/hamiltonian.hpp"
#include "mflq/problem_io.hpp"
#include "mflq/riccati.hpp"
#include "mflq/simulation.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace mflq {

std::uint64_t fnv1a(const std::string& data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::filesystem::path default_output_dir() {
    if (const char* env = std::getenv("MFLQ_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "mflq_out";
}

namespace {

/// Artifacts held in memory until the command completes.
class Artifacts {
public:
    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

    void commit(const std::filesystem::path& dir, const RunConfig& cfg, std::uint64_t hash, int exit_code) const {
        Json names = Json::array();
        for (const auto& [name, content] : files_) {
            write_file_atomic(dir / name, content);
            names.push_back(name);
        }
        char hex[19];
        std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
        Json manifest{{"command", cfg.command}, {"config_hash", hex}, {"exit_code", exit_code}, {"artifacts", names}};
        if (!cfg.example_name.empty()) manifest["example"] = cfg.example_name;
        write_file_atomic(dir / "manifest.json", dump_json(manifest));
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

/// Named pass/fail checks with their measured value and tolerance.
class Checks {
public:
    void add(const std::string& name, double value, double tolerance, bool pass) {
        list_.push_back(Json{{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", pass}});
        all_ = all_ && pass;
    }
    /// Passes when value <= tolerance.
    void at_most(const std::string& name, double value, double tolerance) {
        add(name, value, tolerance, value <= tolerance);
    }
    bool all() const { return all_; }
    const Json& json() const { return list_; }

private:
    Json list_ = Json::array();
    bool all_ = true;
};

std::string columns_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    const std::size_t rows = cols.empty() ? 0 : cols.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            if (c) out += ',';
            out += format_double(cols[c][r]);
        }
        out += '\n';
    }
    return out;
}

std::string file_contents(const std::filesystem::path& p) {
    if (p.empty()) return {};
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::uint64_t config_hash(const RunConfig& c) {
    std::ostringstream os;
    os << c.command << '\n'
       << fnv1a(file_contents(c.problem_path)) << '\n'
       << fnv1a(file_contents(c.compensator_path)) << '\n'
       << fnv1a(file_contents(c.law_path)) << '\n'
       << c.grid_steps << '\n'
       << c.paths << '\n'
       << c.seed << '\n'
       << c.dump << '\n'
       << c.example_name << '\n';
    for (const auto& [k, v] : c.overrides) os << k << '=' << format_double(v) << '\n';
    return fnv1a(os.str());
}

double override_or(const RunConfig& c, const std::string& key, double fallback) {
    auto it = c.overrides.find(key);
    return it == c.overrides.end() ? fallback : it->second;
}

void require_known_overrides(const RunConfig& c, const std::vector<std::string>& keys) {
    std::vector<std::string> bad;
    for (const auto& [k, v] : c.overrides) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) bad.push_back("unknown parameter '" + k + "'");
    }
    if (!bad.empty()) throw ValidationError(bad);
}

std::vector<StateSample> random_states(const ProblemSpec& spec, std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, spec.T);
    std::normal_distribution<double> nz(0.0, 1.0);
    std::vector<StateSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        StateSample s;
        s.t = ut(rng);
        s.x = Vector(spec.n());
        s.xbar = Vector(spec.n());
        for (int k = 0; k < spec.n(); ++k) s.x(k) = nz(rng);
        for (int k = 0; k < spec.n(); ++k) s.xbar(k) = nz(rng);
        out.push_back(std::move(s));
    }
    return out;
}

Json pd_json(const PDReport& r) {
    return Json{{"pass", r.pass()},
                {"joint", {{"ok", r.joint_ok}, {"min_eigenvalue", r.joint_min}, {"worst_t", r.joint_worst_t}}},
                {"control", {{"ok", r.control_ok}, {"min_eigenvalue", r.control_min}, {"worst_t", r.control_worst_t}}},
                {"terminal", {{"ok", r.terminal_ok}, {"min_eigenvalue", r.terminal_min}}}};
}

std::vector<std::string> pd_failures(const PDReport& r) {
    std::vector<std::string> out;
    if (!r.joint_ok) {
        out.push_back("joint weight [[Q,S],[S',R]] >= 0 fails: smallest eigenvalue " + format_double(r.joint_min) +
                      " at t=" + format_double(r.joint_worst_t));
    }
    if (!r.control_ok) {
        out.push_back("control weight R >> 0 fails: smallest eigenvalue " + format_double(r.control_min) +
                      " at t=" + format_double(r.control_worst_t));
    }
    if (!r.terminal_ok) {
        out.push_back("terminal weight G >= 0 fails: smallest eigenvalue " + format_double(r.terminal_min));
    }
    return out;
}

Json rc_group_json(const RCGroupReport& g) {
    return Json{{"pass", g.pass()},
                {"inequality", {{"ok", g.inequality_ok}, {"min", g.inequality_min}, {"worst_t", g.inequality_worst_t}}},
                {"terminal", {{"ok", g.terminal_ok}, {"min", g.terminal_min}}},
                {"denominator",
                 {{"ok", g.denominator_ok}, {"min", g.denominator_min}, {"worst_t", g.denominator_worst_t}}}};
}

std::vector<std::string> rc_failures(const RCReport& r) {
    std::vector<std::string> out;
    auto group = [&](const RCGroupReport& g, const std::string& name) {
        if (!g.inequality_ok) {
            out.push_back(name + " inequality fails: margin " + format_double(g.inequality_min) +
                          " at t=" + format_double(g.inequality_worst_t));
        }
        if (!g.terminal_ok) out.push_back(name + " terminal condition fails: margin " + format_double(g.terminal_min));
        if (!g.denominator_ok) {
            out.push_back(name + " denominator fails: margin " + format_double(g.denominator_min) +
                          " at t=" + format_double(g.denominator_worst_t));
        }
    };
    group(r.deviation, "deviation (H)");
    group(r.mean, "mean (K)");
    return out;
}

Json solution_json(const RiccatiSolution& sol, const RiccatiResidual& res) {
    double mmin = sol.margin.front();
    double mhmin = sol.margin_hat.front();
    for (double v : sol.margin) mmin = std::min(mmin, v);
    for (double v : sol.margin_hat) mhmin = std::min(mhmin, v);
    Json j{{"grid_steps", sol.grid.steps()},
           {"value0", sol.value0 ? Json(*sol.value0) : Json(nullptr)},
           {"margin_min", mmin},
           {"margin_hat_min", mhmin},
           {"residuals", {{"P", res.P}, {"Phat", res.Phat}, {"phi", res.phi}}},
           {"P0", matrix_to_json(sol.P.front().matrix())},
           {"Phat0", matrix_to_json(sol.Phat.front().matrix())}};
    if (sol.phi) j["phi0"] = matrix_to_json(sol.phi->front());
    return j;
}

struct Outcome {
    int code = kExitOk;
    Artifacts artifacts;
};

Outcome cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const auto spec = load_problem(cfg.problem_path);
    const auto sol = solve_riccati(spec, TimeGrid(spec.T, cfg.grid_steps));
    const auto res = riccati_residual(spec, sol);
    Outcome o;
    o.artifacts.add("riccati.csv", riccati_csv(sol));
    o.artifacts.add("solution.json", dump_json(solution_json(sol, res)));
    if (sol.value0) out << "value0 " << format_double(*sol.value0) << "\n";
    return o;
}

Outcome cmd_check_pd(const RunConfig& cfg, std::ostream& out) {
    const auto spec = load_problem(cfg.problem_path);
    const auto r = check_condition_pd(spec, TimeGrid(spec.T, cfg.grid_steps));
    Json j = pd_json(r);
    j["failures"] = pd_failures(r);
    for (const auto& f : pd_failures(r)) out << f << "\n";
    out << (r.pass() ? "PD: pass\n" : "PD: fail\n");
    Outcome o;
    o.code = r.pass() ? kExitOk : kExitCheckFailed;
    o.artifacts.add("pd_report.json", dump_json(j));
    return o;
}

Outcome cmd_check_rc(const RunConfig& cfg, std::ostream& out) {
    const auto spec = load_problem(cfg.problem_path);
    if (cfg.compensator_path.empty()) throw ParseError("check-rc needs --compensator");
    const auto comp = load_compensator(cfg.compensator_path, spec.T);
    if (comp.H.dim() != spec.n()) throw ValidationError({"compensator dimension differs from problem state dimension"});
    const auto r = check_condition_rc(spec, comp, TimeGrid(spec.T, cfg.grid_steps));
    Json j{{"pass", r.pass()}, {"deviation", rc_group_json(r.deviation)}, {"mean", rc_group_json(r.mean)},
           {"failures", rc_failures(r)}};
    for (const auto& f : rc_failures(r)) out << f << "\n";
    out << (r.pass() ? "RC: pass\n" : "RC: fail\n");
    Outcome o;
    o.code = r.pass() ? kExitOk : kExitCheckFailed;
    o.artifacts.add("rc_report.json", dump_json(j));
    return o;
}

Outcome cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const auto spec = load_problem(cfg.problem_path);
    const TimeGrid grid(spec.T, cfg.grid_steps);
    FeedbackLaw law;
    std::optional<double> value0;
    if (!cfg.law_path.empty()) {
        law = load_law(cfg.law_path, spec.T);
    } else {
        const auto sol = solve_riccati(spec, grid);
        law = optimal_feedback_law(spec, sol);
        value0 = sol.value0;
    }
    check_law(spec, law);
    const auto moments = propagate_moments(spec, law, grid);
    SimulationOptions opts;
    opts.retain_paths = cfg.dump;
    opts.threads = cfg.threads;
    const auto ens = simulate_paths(spec, law, grid, cfg.paths, cfg.seed, opts);
    const double z = ens.costStdErr > 0.0 ? (ens.costEstimate - moments.totalCost) / ens.costStdErr : 0.0;
    Json cost{{"oracle", moments.totalCost},
              {"mc_mean", ens.costEstimate},
              {"mc_std_error", ens.costStdErr},
              {"z_score", z},
              {"paths", cfg.paths},
              {"seed", cfg.seed},
              {"grid_steps", cfg.grid_steps},
              {"value0", value0 ? Json(*value0) : Json(nullptr)}};
    out << "oracle " << format_double(moments.totalCost) << "\nmc " << format_double(ens.costEstimate) << " +- "
        << format_double(ens.costStdErr) << "\n";
    Outcome o;
    o.artifacts.add("moments.csv", moments_csv(moments));
    o.artifacts.add("ensemble_summary.csv", ensemble_summary_csv(ens));
    o.artifacts.add("cost.json", dump_json(cost));
    if (cfg.dump) o.artifacts.add("ensemble.bin", ensemble_binary(ens));
    return o;
}

Outcome cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto spec = load_problem(cfg.problem_path);
    if (cfg.law_path.empty()) throw ParseError("evaluate needs --law");
    const auto law = load_law(cfg.law_path, spec.T);
    check_law(spec, law);
    const auto moments = propagate_moments(spec, law, TimeGrid(spec.T, cfg.grid_steps));
    out << "oracle " << format_double(moments.totalCost) << "\n";
    Outcome o;
    o.artifacts.add("moments.csv", moments_csv(moments));
    o.artifacts.add("cost.json", dump_json(Json{{"oracle", moments.totalCost}, {"grid_steps", cfg.grid_steps}}));
    return o;
}

double sup_over_nodes(const TimeGrid& grid, const std::function<double(int)>& f) {
    double worst = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) worst = std::max(worst, f(k));
    return worst;
}

Outcome example_mv(const RunConfig& cfg) {
    require_known_overrides(cfg, {"r", "mu", "sigma", "nu", "T", "x0"});
    const double r = override_or(cfg, "r", 0.05);
    const double mu = override_or(cfg, "mu", 0.35);
    const double sigma = override_or(cfg, "sigma", 1.0);
    const double nu = override_or(cfg, "nu", 1.0);
    const double T = override_or(cfg, "T", 1.0);
    const double x0 = override_or(cfg, "x0", 1.0);
    const auto market = MarketModel::constant(r, Vector::Constant(1, mu), Matrix::Constant(1, 1, sigma));
    const auto spec = build_mean_variance(market, nu, T, x0);
    const auto cf = mv_closed_forms(market, nu, T);
    const TimeGrid grid(T, cfg.grid_steps);
    const auto sol = solve_riccati(spec, grid);
    const auto law = optimal_feedback_law(spec, sol);
    const auto moments = propagate_moments(spec, law, grid);

    Checks c;
    c.at_most("P matches closed form",
              sup_over_nodes(grid, [&](int k) { return std::abs(sol.P[k](0, 0) - cf.scalar("P", grid.t(k))); }), 1e-6);
    c.at_most("Phat vanishes", sup_over_nodes(grid, [&](int k) { return std::abs(sol.Phat[k](0, 0)); }), 1e-8);
    c.at_most("phi matches closed form",
              sup_over_nodes(grid, [&](int k) { return std::abs((*sol.phi)[k](0) - cf.scalar("phi", grid.t(k))); }),
              1e-6);
    c.at_most("gain matches closed form", sup_over_nodes(grid, [&](int k) {
                  return max_abs(Matrix(sol.Gamma[k].transpose()) - cf("gain", grid.t(k)));
              }),
              1e-6);
    c.at_most("offset matches closed form", sup_over_nodes(grid, [&](int k) {
                  return max_abs(Matrix(feedback_offset(grid.t(k), sol, spec)) - cf("offset", grid.t(k)));
              }),
              1e-6);
    const auto states = random_states(spec, cfg.seed, 1000);
    c.at_most("stationarity", stationarity_residual(spec, sol, states), 1e-5);
    double agree = 0.0;
    for (const auto& s : states) {
        const auto u = optimal_control_at(spec, sol, s.t, s.x, s.xbar);
        const Vector b = market.b(s.t);
        const double e = std::exp((b.squaredNorm() - r) * (T - s.t));
        const Vector u_cf = -b * (s.x(0) - s.xbar(0) - e / nu);
        agree = std::max(agree, max_abs(Matrix(u.u - u_cf)));
    }
    c.at_most("closed-form control agrees with feedback law", agree, 1e-6);

    Outcome o;
    o.code = c.all() ? kExitOk : kExitCheckFailed;
    o.artifacts.add("riccati.csv", riccati_csv(sol));
    o.artifacts.add("moments.csv", moments_csv(moments));
    o.artifacts.add("report.json",
                    dump_json(Json{{"example", "mv"}, {"pass", c.all()}, {"oracle_cost", moments.totalCost}, {"checks", c.json()}}));
    return o;
}

Outcome example_speed(const RunConfig& cfg) {
    require_known_overrides(cfg, {"a", "atilde", "b", "btilde", "alpha", "beta", "gamma", "T", "x0"});
    SpeedParams p;
    p.a = override_or(cfg, "a", p.a);
    p.atilde = override_or(cfg, "atilde", p.atilde);
    p.b = override_or(cfg, "b", p.b);
    p.btilde = override_or(cfg, "btilde", p.btilde);
    p.alpha = override_or(cfg, "alpha", p.alpha);
    p.beta = override_or(cfg, "beta", p.beta);
    p.gamma = override_or(cfg, "gamma", p.gamma);
    p.T = override_or(cfg, "T", p.T);
    p.x0 = override_or(cfg, "x0", p.x0);
    const auto ex = build_speed_example(p);
    const auto& spec = ex.spec;
    const TimeGrid grid(p.T, cfg.grid_steps);
    const auto sol = solve_riccati(spec, grid);
    const auto law = optimal_feedback_law(spec, sol);
    const auto moments = propagate_moments(spec, law, grid);

    Checks c;
    double margin = sol.P.front()(0, 0) - p.beta;
    for (const auto& Pk : sol.P) margin = std::min(margin, Pk(0, 0) - p.beta);
    c.add("min P - beta > 0", margin, 0.0, margin > 0.0);
    if (p.gamma > p.beta) {
        const auto comp = speed_compensator(p);
        const auto rc = check_condition_rc(spec, comp, grid);
        c.add("relaxed compensator condition", std::min(rc.deviation.inequality_min, rc.mean.inequality_min), kPsdTol,
              rc.pass());
    }
    const auto states = random_states(spec, cfg.seed, 1000);
    c.at_most("stationarity", stationarity_residual(spec, sol, states), 1e-5);
    if (p.beta != 0.0) {
        double agree = 0.0;
        for (const auto& s : states) {
            const double P = sol.P_at(s.t)(0, 0);
            const double Ph = sol.Phat_at(s.t)(0, 0);
            const double x = s.x(0), xb = s.xbar(0);
            const double u = speed_closed_loop_control(p, P, Ph, x, xb);
            const double ub = speed_closed_loop_control(p, P, Ph, xb, xb);
            const auto adj = decouple_adjoint(spec, sol, s.x, s.xbar, Vector::Constant(1, u), Vector::Constant(1, ub), s.t);
            const double uo = speed_open_loop_control(p, adj.Y(0), adj.Ybar(0), adj.Z[0](0));
            const auto num = optimal_control_at(spec, sol, s.t, s.x, s.xbar);
            agree = std::max({agree, std::abs(uo - u), std::abs(num.u(0) - u)});
        }
        c.at_most("adjoint form of the control agrees with feedback form", agree, 1e-6);
    }

    // one sample path with its exact mean
    const auto ens = simulate_paths(spec, law, grid, 1, cfg.seed);
    const auto nodes = static_cast<std::size_t>(grid.nodes());
    std::vector<double> t(nodes), X(nodes), EX(nodes), U(nodes), EU(nodes), Y(nodes), EY(nodes), Z(nodes), EZ(nodes),
        P(nodes), Ph(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        const int kk = static_cast<int>(k);
        t[k] = grid.t(kk);
        X[k] = ens.x(0, kk, 0);
        EX[k] = ens.mean_x[k](0);
        U[k] = ens.u(0, kk, 0);
        EU[k] = ens.mean_u[k](0);
        P[k] = sol.P[k](0, 0);
        Ph[k] = sol.Phat[k](0, 0);
        Y[k] = P[k] * (X[k] - EX[k]) + Ph[k] * EX[k];
        EY[k] = Ph[k] * EX[k];
        Z[k] = P[k] * U[k];
        EZ[k] = P[k] * EU[k];
    }

    Outcome o;
    o.code = c.all() ? kExitOk : kExitCheckFailed;
    o.artifacts.add("riccati.csv", columns_csv({"t", "P", "Phat"}, {t, P, Ph}));
    o.artifacts.add("state.csv", columns_csv({"t", "X", "EX"}, {t, X, EX}));
    o.artifacts.add("control.csv", columns_csv({"t", "u", "Eu"}, {t, U, EU}));
    o.artifacts.add("adjoint_y.csv", columns_csv({"t", "Y", "EY"}, {t, Y, EY}));
    o.artifacts.add("adjoint_z.csv", columns_csv({"t", "Z", "EZ"}, {t, Z, EZ}));
    o.artifacts.add("moments.csv", moments_csv(moments));
    o.artifacts.add("report.json", dump_json(Json{{"example", "speed"},
                                                  {"pass", c.all()},
                                                  {"warnings", ex.warnings},
                                                  {"P0", P.front()},
                                                  {"Phat0", Ph.front()},
                                                  {"oracle_cost", moments.totalCost},
                                                  {"checks", c.json()}}));
    return o;
}

Outcome example_negdef(const RunConfig& cfg) {
    require_known_overrides(cfg, {"alpha", "atilde", "beta", "gamma", "gammatilde", "theta", "G", "T", "x0"});
    NegDefParams p;
    p.alpha = override_or(cfg, "alpha", p.alpha);
    p.atilde = override_or(cfg, "atilde", p.atilde);
    p.beta = override_or(cfg, "beta", p.beta);
    p.gamma = override_or(cfg, "gamma", p.gamma);
    p.gammatilde = override_or(cfg, "gammatilde", p.gammatilde);
    p.theta = override_or(cfg, "theta", p.theta);
    p.G = override_or(cfg, "G", p.G);
    p.T = override_or(cfg, "T", p.T);
    p.x0 = override_or(cfg, "x0", p.x0);
    const TimeGrid grid(p.T, cfg.grid_steps);
    const auto spec = build_negdef_example(p, &grid);
    const auto cf = negdef_closed_forms(p);
    const auto sol = solve_riccati(spec, grid);
    const auto law = optimal_feedback_law(spec, sol);
    const auto moments = propagate_moments(spec, law, grid);

    Checks c;
    c.at_most("P matches closed form",
              sup_over_nodes(grid, [&](int k) { return std::abs(sol.P[k](0, 0) - cf.scalar("P", grid.t(k))); }), 1e-6);
    c.at_most("Phat matches closed form",
              sup_over_nodes(grid, [&](int k) { return std::abs(sol.Phat[k](0, 0) - cf.scalar("Phat", grid.t(k))); }),
              1e-6);
    c.at_most("gains vanish", sup_over_nodes(grid, [&](int k) {
                  return std::max(max_abs(sol.Gamma[k]), max_abs(sol.GammaHat[k]));
              }),
              1e-10);
    double yerr = 0.0, zmax = 0.0;
    for (int k = 0; k < grid.nodes(); ++k) {
        const double tk = grid.t(k);
        const Vector x = Vector::Constant(1, cf.scalar("X", tk));
        const Vector zero = Vector::Zero(1);
        const auto adj = decouple_adjoint(spec, sol, x, x, zero, zero, tk);
        yerr = std::max(yerr, std::abs(adj.Y(0) - cf.scalar("Y", tk)));
        zmax = std::max(zmax, std::abs(adj.Z[0](0)));
    }
    c.at_most("Y matches closed form", yerr, 1e-5);
    c.at_most("Z vanishes", zmax, 1e-10);
    c.at_most("mean matches closed form", sup_over_nodes(grid, [&](int k) {
                  return std::abs(moments.m[k](0) - cf.scalar("mean", grid.t(k)));
              }),
              1e-6);
    c.at_most("stationarity", stationarity_residual(spec, sol, random_states(spec, cfg.seed, 1000)), 1e-5);

    Outcome o;
    o.code = c.all() ? kExitOk : kExitCheckFailed;
    o.artifacts.add("riccati.csv", riccati_csv(sol));
    o.artifacts.add("moments.csv", moments_csv(moments));
    o.artifacts.add("report.json", dump_json(Json{{"example", "negdef"},
                                                  {"pass", c.all()},
                                                  {"oracle_cost", moments.totalCost},
                                                  {"checks", c.json()}}));
    return o;
}

Outcome cmd_example(const RunConfig& cfg, std::ostream& out) {
    Outcome o;
    if (cfg.example_name == "mv") {
        o = example_mv(cfg);
    } else if (cfg.example_name == "speed") {
        o = example_speed(cfg);
    } else if (cfg.example_name == "negdef") {
        o = example_negdef(cfg);
    } else {
        throw ParseError("unknown example '" + cfg.example_name + "' (expected mv, speed or negdef)");
    }
    out << "example " << cfg.example_name << ": " << (o.code == kExitOk ? "pass" : "fail") << "\n";
    return o;
}

void check_config(const RunConfig& cfg) {
    std::vector<std::string> bad;
    if (cfg.grid_steps < 10) bad.push_back("grid-steps must be at least 10");
    if (cfg.paths < 1) bad.push_back("paths must be positive");
    if (cfg.threads < 1) bad.push_back("threads must be positive");
    for (const auto* p : {&cfg.problem_path, &cfg.compensator_path, &cfg.law_path}) {
        if (!p->empty() && !std::filesystem::exists(*p)) bad.push_back("file not found: " + p->string());
    }
    if (cfg.command != "example" && cfg.problem_path.empty()) bad.push_back(cfg.command + " needs a problem file");
    if (!bad.empty()) throw ValidationError(bad);
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        check_config(cfg);
        if (cfg.command == "validate") {
            try {
                load_problem(cfg.problem_path);
            } catch (const ValidationError& e) {
                for (const auto& v : e.violations) out << v << "\n";
                return kExitCheckFailed;
            }
            out << "valid\n";
            return kExitOk;
        }
        Outcome o;
        if (cfg.command == "solve") {
            o = cmd_solve(cfg, out);
        } else if (cfg.command == "check-pd") {
            o = cmd_check_pd(cfg, out);
        } else if (cfg.command == "check-rc") {
            o = cmd_check_rc(cfg, out);
        } else if (cfg.command == "simulate") {
            o = cmd_simulate(cfg, out);
        } else if (cfg.command == "evaluate") {
            o = cmd_evaluate(cfg, out);
        } else if (cfg.command == "example") {
            o = cmd_example(cfg, out);
        } else {
            throw ParseError("unknown command '" + cfg.command + "'");
        }
        const auto dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
        o.artifacts.commit(dir, cfg, config_hash(cfg), o.code);
        return o.code;
    } catch (const ValidationError& e) {
        err << e.what() << "\n";
        return kExitInputError;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const SingularGainDenominator& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const IndefiniteB& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const MissingLinearTerm& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumericalFailure;
    } catch (const Error& e) {
        // remaining library errors describe bad inputs or parameters
        err << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return kExitInputError;
    }
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field linear-quadratic control: solve, check, simulate"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string out_dir;
    std::vector<std::string> sets;

    auto common = [&](CLI::App* sub, bool needs_problem) {
        if (needs_problem) sub->add_option("problem", cfg.problem_path, "Problem JSON file")->required();
        sub->add_option("--grid-steps", cfg.grid_steps, "Solver grid steps")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
        sub->add_option("--out", out_dir, "Output directory (default $MFLQ_OUT_DIR or ./mflq_out)");
    };
    auto* validate = app.add_subcommand("validate", "Report every violation in a problem file");
    validate->add_option("problem", cfg.problem_path, "Problem JSON file")->required();
    common(app.add_subcommand("solve", "Solve the Riccati system; writes riccati.csv and solution.json"), true);
    common(app.add_subcommand("check-pd", "Check the positive-definite weight condition"), true);
    auto* rc = app.add_subcommand("check-rc", "Check the relaxed compensator condition");
    common(rc, true);
    rc->add_option("--compensator", cfg.compensator_path, "Compensator JSON file")->required();
    auto* sim = app.add_subcommand("simulate", "Moment oracle and Monte Carlo cost of the optimal (or given) law");
    common(sim, true);
    sim->add_option("--paths", cfg.paths, "Monte Carlo paths")->capture_default_str();
    sim->add_option("--law", cfg.law_path, "Feedback law JSON (default: optimal law)");
    sim->add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();
    sim->add_flag("--dump", cfg.dump, "Also write ensemble.bin");
    auto* ev = app.add_subcommand("evaluate", "Oracle cost of a feedback law");
    common(ev, true);
    ev->add_option("--law", cfg.law_path, "Feedback law JSON")->required();
    auto* ex = app.add_subcommand("example", "Run a built-in example: mv, speed or negdef");
    common(ex, false);
    ex->add_option("name", cfg.example_name, "mv, speed or negdef")->required()->check(
        CLI::IsMember({"mv", "speed", "negdef"}));
    ex->add_option("--set", sets, "Parameter override key=value (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitInputError;
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.output_dir = out_dir;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            err << "--set expects key=value, got '" << s << "'\n";
            return kExitInputError;
        }
        try {
            std::size_t used = 0;
            const std::string val = s.substr(eq + 1);
            cfg.overrides[s.substr(0, eq)] = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
        } catch (const std::exception&) {
            err << "--set " << s << ": value is not a number\n";
            return kExitInputError;
        }
    }
    return run(cfg, out, err);
}

}  // namespace mflq
