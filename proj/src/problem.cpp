#include "mflq/problem.hpp"

#include "mflq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mflq {

namespace {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_time(const ProblemSpec& spec, double t) {
    const double slack = 1e-12 * std::max(1.0, spec.T);
    if (!(t >= -slack && t <= spec.T + slack)) throw OutOfDomain(t, spec.T);
}

}  // namespace

PointCoefficients evaluate_coefficients(const ProblemSpec& spec, double t) {
    check_time(spec, t);
    const auto& c = spec.coeffs;
    const auto& w = spec.weights;
    PointCoefficients p;
    p.t = t;
    p.A = c.A(t);
    p.Atilde = c.Atilde(t);
    p.Ahat = p.A + p.Atilde;
    p.B = c.B(t);
    p.Btilde = c.Btilde(t);
    p.Bhat = p.B + p.Btilde;
    const auto d = static_cast<std::size_t>(c.d);
    p.C.resize(d);
    p.Ctilde.resize(d);
    p.Chat.resize(d);
    p.D.resize(d);
    p.Dtilde.resize(d);
    p.Dhat.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        p.C[j] = c.C[j](t);
        p.Ctilde[j] = c.Ctilde[j](t);
        p.Chat[j] = p.C[j] + p.Ctilde[j];
        p.D[j] = c.D[j](t);
        p.Dtilde[j] = c.Dtilde[j](t);
        p.Dhat[j] = p.D[j] + p.Dtilde[j];
    }
    p.Q = symmetrized(w.Q(t));
    p.Qtilde = symmetrized(w.Qtilde(t));
    p.Qhat = symmetrized(p.Q + p.Qtilde);
    p.S = w.S(t);
    p.Stilde = w.Stilde(t);
    p.Shat = p.S + p.Stilde;
    p.R = symmetrized(w.R(t));
    p.Rtilde = symmetrized(w.Rtilde(t));
    p.Rhat = symmetrized(p.R + p.Rtilde);
    return p;
}

SymMatrix terminal_hat(const ProblemSpec& spec) { return spec.weights.G + spec.weights.Gtilde; }

HattedCoefficients hat_coefficients(const ProblemSpec& spec, double t) {
    auto p = evaluate_coefficients(spec, t);
    return HattedCoefficients{std::move(p.Ahat), std::move(p.Bhat), std::move(p.Chat), std::move(p.Dhat),
                              SymMatrix(p.Qhat),  std::move(p.Shat), SymMatrix(p.Rhat), terminal_hat(spec)};
}

BlockQuadruple bold_quadruple(const ProblemSpec& spec, double t) {
    const auto p = evaluate_coefficients(spec, t);
    return BlockQuadruple::assemble(SymMatrix(p.Q), SymMatrix(p.Qhat), p.S, p.Shat, SymMatrix(p.R),
                                    SymMatrix(p.Rhat), spec.weights.G, terminal_hat(spec));
}

CoefficientTable::CoefficientTable(const ProblemSpec& spec, const TimeGrid& grid) : grid_(grid) {
    const TimeGrid half = grid.refined(2);
    entries_.reserve(static_cast<std::size_t>(half.nodes()));
    for (int i = 0; i < half.nodes(); ++i) entries_.push_back(evaluate_coefficients(spec, half.t(i)));
}

PDReport check_condition_pd(const ProblemSpec& spec, const TimeGrid& grid, double delta, double tol) {
    if (!(delta > 0.0)) throw DomainError("check_condition_pd: delta must be positive");
    if (!(tol >= 0.0)) throw DomainError("check_condition_pd: tol must be non-negative");
    PDReport r;
    r.joint_min = std::numeric_limits<double>::infinity();
    r.control_min = std::numeric_limits<double>::infinity();
    std::vector<SymMatrix> controls;
    controls.reserve(static_cast<std::size_t>(grid.nodes()));
    for (int k = 0; k < grid.nodes(); ++k) {
        const double t = grid.t(k);
        const auto q = bold_quadruple(spec, t);
        const double jm = min_eigenvalue(q.joint());
        if (jm < r.joint_min) {
            r.joint_min = jm;
            r.joint_worst_t = t;
        }
        const double rm = min_eigenvalue(q.R);
        if (rm < r.control_min) {
            r.control_min = rm;
            r.control_worst_t = t;
        }
        controls.push_back(q.R);
    }
    r.terminal_min = std::min(min_eigenvalue(spec.weights.G), min_eigenvalue(terminal_hat(spec)));
    r.joint_ok = r.joint_min >= -tol;
    r.control_ok = is_uniformly_pd(controls, delta);
    r.terminal_ok = r.terminal_min >= -tol;
    return r;
}

namespace {

struct Validator {
    std::vector<std::string> out;

    void add(const std::string& s) { out.push_back(s); }

    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    }

    bool shape(const TimeFunctionMatrix& f, Eigen::Index rows, Eigen::Index cols, const std::string& name,
               double T) {
        if (f.empty()) {
            add(name + ": missing");
            return false;
        }
        bool ok = true;
        if (f.rows() != rows || f.cols() != cols) {
            add(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
            ok = false;
        }
        if (!f.is_constant() && std::abs(f.horizon() - T) > 1e-12 * std::max(1.0, T)) {
            add(name + ": sample grid ends at " + fmt(f.horizon()) + " instead of T=" + fmt(T));
            ok = false;
        }
        const auto& s = f.samples();
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (!s[k].allFinite()) {
                add(name + ": non-finite entry at sample " + std::to_string(k));
                ok = false;
            }
        }
        return ok;
    }

    void symmetric(const TimeFunctionMatrix& f, const std::string& name) {
        const auto& s = f.samples();
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k].rows() != s[k].cols() || !s[k].allFinite()) continue;
            const double asym = max_abs(s[k] - s[k].transpose());
            if (asym > 1e-12 * std::max(1.0, max_abs(s[k]))) {
                add(name + ": not symmetric at sample " + std::to_string(k) + " (asymmetry " + fmt(asym) + ")");
            }
        }
    }

    void sym_matrix(const SymMatrix& g, int n, const std::string& name) {
        if (g.dim() != n) add(name + ": expected " + std::to_string(n) + "x" + std::to_string(n));
    }

    void channels(const std::vector<TimeFunctionMatrix>& fs, int d, Eigen::Index rows, Eigen::Index cols,
                  const std::string& name, double T) {
        if (static_cast<int>(fs.size()) != d) {
            add(name + ": expected " + std::to_string(d) + " channels, got " + std::to_string(fs.size()));
            return;
        }
        for (std::size_t j = 0; j < fs.size(); ++j) shape(fs[j], rows, cols, name + "[" + std::to_string(j) + "]", T);
    }
};

}  // namespace

std::vector<std::string> validate(const ProblemSpec& spec) {
    Validator v;
    if (!(spec.T > 0.0) || !std::isfinite(spec.T)) v.add("T: must be positive and finite");
    const int n = spec.n();
    const int m = spec.m();
    const int d = spec.d();
    if (n < 1) v.add("n: must be positive");
    if (m < 1) v.add("m: must be positive");
    if (d < 1) v.add("d: must be positive");
    if (!v.out.empty() && (n < 1 || m < 1 || d < 1)) return v.out;
    if (spec.x0.size() != n) v.add("x0: expected length " + std::to_string(n));
    else if (!spec.x0.allFinite()) v.add("x0: non-finite entry");

    const auto& c = spec.coeffs;
    const auto& w = spec.weights;
    v.shape(c.A, n, n, "A", spec.T);
    v.shape(c.Atilde, n, n, "Atilde", spec.T);
    v.shape(c.B, n, m, "B", spec.T);
    v.shape(c.Btilde, n, m, "Btilde", spec.T);
    v.channels(c.C, d, n, n, "C", spec.T);
    v.channels(c.Ctilde, d, n, n, "Ctilde", spec.T);
    v.channels(c.D, d, n, m, "D", spec.T);
    v.channels(c.Dtilde, d, n, m, "Dtilde", spec.T);
    if (v.shape(w.Q, n, n, "Q", spec.T)) v.symmetric(w.Q, "Q");
    if (v.shape(w.Qtilde, n, n, "Qtilde", spec.T)) v.symmetric(w.Qtilde, "Qtilde");
    v.shape(w.S, n, m, "S", spec.T);
    v.shape(w.Stilde, n, m, "Stilde", spec.T);
    if (v.shape(w.R, m, m, "R", spec.T)) v.symmetric(w.R, "R");
    if (v.shape(w.Rtilde, m, m, "Rtilde", spec.T)) v.symmetric(w.Rtilde, "Rtilde");
    v.sym_matrix(w.G, n, "G");
    v.sym_matrix(w.Gtilde, n, "Gtilde");
    if (w.ell) {
        if (w.ell->size() != n) v.add("ell: expected length " + std::to_string(n));
        else if (!w.ell->allFinite()) v.add("ell: non-finite entry");
    }
    return v.out;
}

void require_valid(const ProblemSpec& spec) {
    auto violations = validate(spec);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

}  // namespace mflq
