#include "mflq/export.hpp"

#include "mflq/errors.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <sstream>

namespace mflq {

static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

class Csv {
public:
    void cell(const std::string& s) {
        if (!first_) out_ += ',';
        out_ += s;
        first_ = false;
    }
    void cell(double v) { cell(format_double(v)); }
    void end_row() {
        out_ += '\n';
        first_ = true;
    }
    std::string str() && { return std::move(out_); }

private:
    std::string out_;
    bool first_ = true;
};

std::string idx(const char* name, Eigen::Index i, Eigen::Index j) {
    return std::string(name) + "[" + std::to_string(i) + "][" + std::to_string(j) + "]";
}

std::string idx(const char* name, Eigen::Index i) { return std::string(name) + "[" + std::to_string(i) + "]"; }

template <typename T>
void put(std::string& out, const T& v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ParseError("ensemble dump truncated at byte " + std::to_string(pos));
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

constexpr char kMagic[8] = {'M', 'F', 'L', 'Q', 'E', 'N', 'S', '1'};

}  // namespace

std::string riccati_csv(const RiccatiSolution& sol) {
    const Eigen::Index n = sol.P.front().dim();
    const Eigen::Index m = sol.Gamma.front().rows();
    Csv csv;
    csv.cell("t");
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) csv.cell(idx("P", i, j));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) csv.cell(idx("Phat", i, j));
    if (sol.phi)
        for (Eigen::Index i = 0; i < n; ++i) csv.cell(idx("phi", i));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) csv.cell(idx("Gamma", i, j));
    csv.cell("margin1");
    csv.cell("margin2");
    csv.end_row();
    for (int k = 0; k < sol.grid.nodes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        csv.cell(sol.grid.t(k));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) csv.cell(sol.P[kk](i, j));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) csv.cell(sol.Phat[kk](i, j));
        if (sol.phi)
            for (Eigen::Index i = 0; i < n; ++i) csv.cell((*sol.phi)[kk](i));
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < n; ++j) csv.cell(sol.Gamma[kk](i, j));
        csv.cell(sol.margin[kk]);
        csv.cell(sol.margin_hat[kk]);
        csv.end_row();
    }
    return std::move(csv).str();
}

std::string moments_csv(const MomentState& ms) {
    const Eigen::Index n = ms.m.front().size();
    Csv csv;
    csv.cell("t");
    for (Eigen::Index i = 0; i < n; ++i) csv.cell(idx("m", i));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) csv.cell(idx("V", i, j));
    csv.cell("runningCost");
    csv.end_row();
    for (int k = 0; k < ms.grid.nodes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        csv.cell(ms.grid.t(k));
        for (Eigen::Index i = 0; i < n; ++i) csv.cell(ms.m[kk](i));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) csv.cell(ms.V[kk](i, j));
        csv.cell(ms.runningCost[kk]);
        csv.end_row();
    }
    return std::move(csv).str();
}

std::string ensemble_summary_csv(const PathEnsemble& e) {
    Csv csv;
    csv.cell("t");
    for (int i = 0; i < e.n; ++i) csv.cell(idx("empMean", i));
    for (int i = 0; i < e.n; ++i) csv.cell(idx("empVar", i, i));
    csv.end_row();
    for (int k = 0; k < e.grid.nodes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        csv.cell(e.grid.t(k));
        for (int i = 0; i < e.n; ++i) csv.cell(e.emp_mean[kk](i));
        for (int i = 0; i < e.n; ++i) csv.cell(e.emp_var[kk](i));
        csv.end_row();
    }
    return std::move(csv).str();
}

std::string ensemble_binary(const PathEnsemble& e) {
    if (!e.retained) throw MissingIncrements();
    std::string out;
    out.reserve(64 + 8 * (e.X.size() + e.U.size() + e.dW.size() + e.path_cost.size()));
    out.append(kMagic, sizeof(kMagic));
    put<std::int32_t>(out, e.n);
    put<std::int32_t>(out, e.m);
    put<std::int32_t>(out, e.d);
    put<std::int32_t>(out, e.N);
    put<std::int32_t>(out, e.grid.steps());
    put<std::uint64_t>(out, e.seed);
    put<double>(out, e.grid.horizon());
    put<std::int32_t>(out, e.mode == MeanFieldMode::Particle ? 1 : 0);
    for (const auto* arr : {&e.X, &e.U, &e.dW, &e.path_cost}) {
        out.append(reinterpret_cast<const char*>(arr->data()), arr->size() * sizeof(double));
    }
    return out;
}

PathEnsemble read_ensemble_binary(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("ensemble dump: bad magic header");
    }
    std::size_t pos = sizeof(kMagic);
    PathEnsemble e;
    e.n = take<std::int32_t>(bytes, pos);
    e.m = take<std::int32_t>(bytes, pos);
    e.d = take<std::int32_t>(bytes, pos);
    e.N = take<std::int32_t>(bytes, pos);
    const int steps = take<std::int32_t>(bytes, pos);
    e.seed = take<std::uint64_t>(bytes, pos);
    const double T = take<double>(bytes, pos);
    e.mode = take<std::int32_t>(bytes, pos) == 1 ? MeanFieldMode::Particle : MeanFieldMode::ExactMean;
    if (e.n < 1 || e.m < 1 || e.d < 1 || e.N < 1 || steps < 1) throw ParseError("ensemble dump: bad dimensions");
    e.grid = TimeGrid(T, steps);
    e.retained = true;
    const auto N = static_cast<std::size_t>(e.N);
    const auto nodes = static_cast<std::size_t>(steps + 1);
    auto read = [&](std::vector<double>& v, std::size_t count) {
        if (pos + count * sizeof(double) > bytes.size()) throw ParseError("ensemble dump truncated");
        v.resize(count);
        std::memcpy(v.data(), bytes.data() + pos, count * sizeof(double));
        pos += count * sizeof(double);
    };
    read(e.X, N * nodes * static_cast<std::size_t>(e.n));
    read(e.U, N * nodes * static_cast<std::size_t>(e.m));
    read(e.dW, N * static_cast<std::size_t>(steps) * static_cast<std::size_t>(e.d));
    read(e.path_cost, N);
    if (pos != bytes.size()) throw ParseError("ensemble dump has trailing bytes");
    return e;
}

}  // namespace mflq
