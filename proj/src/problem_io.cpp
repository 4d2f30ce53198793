#include "mflq/problem_io.hpp"

#include "mflq/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mflq {

namespace {

const Json& field(const Json& obj, const std::string& key, const std::string& where) {
    const std::string name = where.empty() ? key : where + "." + key;
    if (!obj.is_object()) throw ParseError("expected an object at '" + (where.empty() ? "<root>" : where) + "'");
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError("missing field '" + name + "'");
    return *it;
}

double number(const Json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError("expected a number at '" + where + "'");
    return j.get<double>();
}

int integer(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ParseError("expected an integer at '" + where + "'");
    return j.get<int>();
}

Vector vector_from_json(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError("expected an array of numbers at '" + where + "'");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
    return v;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

std::vector<TimeFunctionMatrix> list_from_json(const Json& j, const std::string& where, double horizon) {
    if (!j.is_array()) throw ParseError("expected an array of time functions at '" + where + "'");
    std::vector<TimeFunctionMatrix> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(time_function_from_json(j[i], where + "[" + std::to_string(i) + "]", horizon));
    }
    return out;
}

Json list_to_json(const std::vector<TimeFunctionMatrix>& v) {
    Json out = Json::array();
    for (const auto& f : v) out.push_back(time_function_to_json(f));
    return out;
}

Json lambda_to_json(const LambdaFunction& f) {
    return Json{{"F0", matrix_to_json(f.F0().matrix())}, {"fdot", time_function_to_json(f.fdot())}};
}

LambdaFunction lambda_from_json(const Json& j, const std::string& where, double horizon) {
    const Matrix F0 = matrix_from_json(field(j, "F0", where), where + ".F0");
    if (F0.rows() != F0.cols()) throw ValidationError({where + ".F0: must be square"});
    if (max_abs(F0 - F0.transpose()) > 1e-12 * std::max(1.0, max_abs(F0))) {
        throw ValidationError({where + ".F0: not symmetric"});
    }
    auto fdot = time_function_from_json(field(j, "fdot", where), where + ".fdot", horizon);
    try {
        return LambdaFunction(SymMatrix(F0), std::move(fdot));
    } catch (const InvalidMatrix& e) {
        throw ValidationError({where + ": " + e.what()});
    }
}

}  // namespace

Json matrix_to_json(const Matrix& a) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < a.cols(); ++k) row.push_back(a(i, k));
        out.push_back(std::move(row));
    }
    return out;
}

Matrix matrix_from_json(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ParseError("expected a non-empty array of rows at '" + where + "'");
    const std::size_t rows = j.size();
    if (!j[0].is_array() || j[0].empty()) throw ParseError("expected a non-empty row at '" + where + "[0]'");
    const std::size_t cols = j[0].size();
    Matrix a(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string rw = where + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || j[i].size() != cols) throw ParseError("row length mismatch at '" + rw + "'");
        for (std::size_t k = 0; k < cols; ++k) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                number(j[i][k], rw + "[" + std::to_string(k) + "]");
        }
    }
    return a;
}

Json time_function_to_json(const TimeFunctionMatrix& f) {
    if (f.is_constant()) return Json{{"constant", matrix_to_json(f.samples().front())}};
    Json samples = Json::array();
    for (const auto& s : f.samples()) samples.push_back(matrix_to_json(s));
    return Json{{"grid", Json{{"count", f.samples().size()}, {"horizon", f.horizon()}, {"samples", samples}}}};
}

TimeFunctionMatrix time_function_from_json(const Json& j, const std::string& where, double horizon) {
    if (!j.is_object()) throw ParseError("expected {constant} or {grid} at '" + where + "'");
    if (j.contains("constant")) {
        return TimeFunctionMatrix::constant(matrix_from_json(j["constant"], where + ".constant"));
    }
    if (!j.contains("grid")) throw ParseError("missing field '" + where + ".constant' or '" + where + ".grid'");
    const std::string gw = where + ".grid";
    const Json& g = j["grid"];
    const int count = integer(field(g, "count", gw), gw + ".count");
    const Json& sj = field(g, "samples", gw);
    if (!sj.is_array()) throw ParseError("expected an array of matrices at '" + gw + ".samples'");
    std::vector<Matrix> samples;
    samples.reserve(sj.size());
    for (std::size_t k = 0; k < sj.size(); ++k) {
        samples.push_back(matrix_from_json(sj[k], gw + ".samples[" + std::to_string(k) + "]"));
    }
    std::vector<std::string> issues;
    if (count != static_cast<int>(samples.size())) {
        issues.push_back(gw + ": count " + std::to_string(count) + " differs from " + std::to_string(samples.size()) +
                         " samples");
    }
    if (samples.size() < 2) issues.push_back(gw + ": at least two samples required");
    double h = horizon;
    if (g.contains("horizon")) h = number(g["horizon"], gw + ".horizon");
    if (g.contains("times")) {
        const Vector times = vector_from_json(g["times"], gw + ".times");
        if (static_cast<std::size_t>(times.size()) != samples.size()) {
            issues.push_back(gw + ".times: length differs from samples");
        } else if (times.size() >= 2) {
            h = times(times.size() - 1);
            const double step = h / static_cast<double>(times.size() - 1);
            for (Eigen::Index k = 0; k < times.size(); ++k) {
                const double expect = static_cast<double>(k) * step;
                if (std::abs(times(k) - expect) > 1e-9 * std::max(1.0, std::abs(h))) {
                    issues.push_back(gw + ".times: non-uniform spacing at sample " + std::to_string(k) + " (t=" +
                                     std::to_string(times(k)) + ", expected " + std::to_string(expect) + ")");
                    break;
                }
            }
        }
    }
    if (!(h > 0.0)) issues.push_back(gw + ": horizon must be positive");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].rows() != samples[0].rows() || samples[k].cols() != samples[0].cols()) {
            issues.push_back(gw + ".samples[" + std::to_string(k) + "]: inconsistent shape");
        }
    }
    if (!issues.empty()) throw ValidationError(issues);
    return TimeFunctionMatrix::sampled(h, std::move(samples));
}

Json problem_to_json(const ProblemSpec& spec) {
    const auto& c = spec.coeffs;
    const auto& w = spec.weights;
    Json coeffs{{"A", time_function_to_json(c.A)},          {"Atilde", time_function_to_json(c.Atilde)},
                {"B", time_function_to_json(c.B)},          {"Btilde", time_function_to_json(c.Btilde)},
                {"C", list_to_json(c.C)},                   {"Ctilde", list_to_json(c.Ctilde)},
                {"D", list_to_json(c.D)},                   {"Dtilde", list_to_json(c.Dtilde)}};
    Json weights{{"Q", time_function_to_json(w.Q)},   {"Qtilde", time_function_to_json(w.Qtilde)},
                 {"S", time_function_to_json(w.S)},   {"Stilde", time_function_to_json(w.Stilde)},
                 {"R", time_function_to_json(w.R)},   {"Rtilde", time_function_to_json(w.Rtilde)},
                 {"G", matrix_to_json(w.G.matrix())}, {"Gtilde", matrix_to_json(w.Gtilde.matrix())}};
    if (w.ell) weights["ell"] = vector_to_json(*w.ell);
    return Json{{"T", spec.T},          {"n", c.n},           {"m", c.m},
                {"d", c.d},             {"x0", vector_to_json(spec.x0)},
                {"coefficients", coeffs}, {"weights", weights}};
}

ProblemSpec problem_from_json(const Json& j) {
    ProblemSpec spec;
    spec.T = number(field(j, "T", ""), "T");
    auto& c = spec.coeffs;
    c.n = integer(field(j, "n", ""), "n");
    c.m = integer(field(j, "m", ""), "m");
    c.d = integer(field(j, "d", ""), "d");
    spec.x0 = vector_from_json(field(j, "x0", ""), "x0");
    const double T = spec.T;

    const Json& cj = field(j, "coefficients", "");
    auto tf = [&](const Json& obj, const char* key, const std::string& where) {
        return time_function_from_json(field(obj, key, where), where + "." + key, T);
    };
    c.A = tf(cj, "A", "coefficients");
    c.Atilde = tf(cj, "Atilde", "coefficients");
    c.B = tf(cj, "B", "coefficients");
    c.Btilde = tf(cj, "Btilde", "coefficients");
    c.C = list_from_json(field(cj, "C", "coefficients"), "coefficients.C", T);
    c.Ctilde = list_from_json(field(cj, "Ctilde", "coefficients"), "coefficients.Ctilde", T);
    c.D = list_from_json(field(cj, "D", "coefficients"), "coefficients.D", T);
    c.Dtilde = list_from_json(field(cj, "Dtilde", "coefficients"), "coefficients.Dtilde", T);

    const Json& wj = field(j, "weights", "");
    auto& w = spec.weights;
    w.Q = tf(wj, "Q", "weights");
    w.Qtilde = tf(wj, "Qtilde", "weights");
    w.S = tf(wj, "S", "weights");
    w.Stilde = tf(wj, "Stilde", "weights");
    w.R = tf(wj, "R", "weights");
    w.Rtilde = tf(wj, "Rtilde", "weights");
    const Matrix G = matrix_from_json(field(wj, "G", "weights"), "weights.G");
    const Matrix Gt = matrix_from_json(field(wj, "Gtilde", "weights"), "weights.Gtilde");

    std::vector<std::string> issues;
    auto square_sym = [&](const Matrix& a, const char* name) {
        if (a.rows() != a.cols()) {
            issues.push_back(std::string("weights.") + name + ": not square");
        } else if (max_abs(a - a.transpose()) > 1e-12 * std::max(1.0, max_abs(a))) {
            issues.push_back(std::string("weights.") + name + ": not symmetric");
        }
    };
    square_sym(G, "G");
    square_sym(Gt, "Gtilde");
    if (!issues.empty()) throw ValidationError(issues);
    w.G = SymMatrix(G);
    w.Gtilde = SymMatrix(Gt);
    if (wj.contains("ell") && !wj["ell"].is_null()) w.ell = vector_from_json(wj["ell"], "weights.ell");
    require_valid(spec);
    return spec;
}

Json compensator_to_json(const CompensatorPair& c) {
    return Json{{"H", lambda_to_json(c.H)}, {"K", lambda_to_json(c.K)}};
}

CompensatorPair compensator_from_json(const Json& j, double horizon) {
    CompensatorPair c;
    c.H = lambda_from_json(field(j, "H", ""), "H", horizon);
    c.K = lambda_from_json(field(j, "K", ""), "K", horizon);
    if (c.H.dim() != c.K.dim()) throw ValidationError({"compensator: H and K dimensions differ"});
    return c;
}

Json law_to_json(const FeedbackLaw& law) {
    return Json{{"Theta", time_function_to_json(law.Theta)},
                {"ThetaHat", time_function_to_json(law.ThetaHat)},
                {"c", time_function_to_json(law.c)}};
}

FeedbackLaw law_from_json(const Json& j, double horizon) {
    FeedbackLaw law;
    law.Theta = time_function_from_json(field(j, "Theta", ""), "Theta", horizon);
    law.ThetaHat = time_function_from_json(field(j, "ThetaHat", ""), "ThetaHat", horizon);
    law.c = time_function_from_json(field(j, "c", ""), "c", horizon);
    return law;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

ProblemSpec load_problem(const std::filesystem::path& path) { return problem_from_json(read_json_file(path)); }

void save_problem(const ProblemSpec& spec, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(problem_to_json(spec)));
}

CompensatorPair load_compensator(const std::filesystem::path& path, double horizon) {
    return compensator_from_json(read_json_file(path), horizon);
}

void save_compensator(const CompensatorPair& c, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(compensator_to_json(c)));
}

FeedbackLaw load_law(const std::filesystem::path& path, double horizon) {
    return law_from_json(read_json_file(path), horizon);
}

void save_law(const FeedbackLaw& law, const std::filesystem::path& path) {
    write_file_atomic(path, dump_json(law_to_json(law)));
}

}  // namespace mflq
