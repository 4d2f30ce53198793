#include "mflq/time_function.hpp"

#include "mflq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mflq {

TimeGrid::TimeGrid(double horizon, int steps) : T_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("time grid horizon must be positive");
    if (steps < 1) throw DomainError("time grid needs at least one step");
}

TimeFunctionMatrix TimeFunctionMatrix::constant(Matrix value) {
    require_finite(value, "constant time function");
    TimeFunctionMatrix f;
    f.rows_ = value.rows();
    f.cols_ = value.cols();
    f.samples_.push_back(std::move(value));
    return f;
}

TimeFunctionMatrix TimeFunctionMatrix::zero(Eigen::Index rows, Eigen::Index cols) {
    return constant(Matrix::Zero(rows, cols));
}

TimeFunctionMatrix TimeFunctionMatrix::sampled(double horizon, std::vector<Matrix> samples) {
    if (samples.size() < 2) throw InvalidMatrix("sampled time function needs at least two samples");
    if (!(horizon > 0.0)) throw DomainError("sampled time function horizon must be positive");
    TimeFunctionMatrix f;
    f.rows_ = samples.front().rows();
    f.cols_ = samples.front().cols();
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].rows() != f.rows_ || samples[k].cols() != f.cols_) {
            throw InvalidMatrix("sample " + std::to_string(k) + " has inconsistent shape");
        }
        require_finite(samples[k], "time function sample");
    }
    f.T_ = horizon;
    f.samples_ = std::move(samples);
    return f;
}

void TimeFunctionMatrix::locate(double t, std::size_t& i, double& w) const {
    const std::size_t intervals = samples_.size() - 1;
    double s = t / T_ * static_cast<double>(intervals);
    const double nearest = std::round(s);
    if (std::abs(s - nearest) <= 1e-9 * std::max(1.0, std::abs(s))) s = nearest;
    if (s <= 0.0) {
        i = 0;
        w = 0.0;
        return;
    }
    if (s >= static_cast<double>(intervals)) {
        i = intervals;
        w = 0.0;
        return;
    }
    i = static_cast<std::size_t>(std::floor(s));
    w = s - static_cast<double>(i);
}

Matrix TimeFunctionMatrix::operator()(double t) const {
    Matrix out;
    evaluate_into(t, out);
    return out;
}

void TimeFunctionMatrix::evaluate_into(double t, Matrix& out) const {
    if (samples_.empty()) throw InvalidMatrix("evaluating an empty time function");
    if (samples_.size() == 1) {
        out = samples_.front();
        return;
    }
    std::size_t i;
    double w;
    locate(t, i, w);
    if (w == 0.0) {
        out = samples_[i];
    } else {
        out.resize(rows_, cols_);
        out.noalias() = (1.0 - w) * samples_[i] + w * samples_[i + 1];
    }
}

std::vector<double> TimeFunctionMatrix::breakpoints(double horizon) const {
    std::vector<double> out;
    if (samples_.size() <= 1) {
        out = {0.0, horizon};
        return out;
    }
    const std::size_t intervals = samples_.size() - 1;
    for (std::size_t k = 0; k <= intervals; ++k) {
        out.push_back(k == intervals ? T_ : T_ * static_cast<double>(k) / static_cast<double>(intervals));
    }
    return out;
}

TimeFunctionMatrix TimeFunctionMatrix::transposed() const {
    if (samples_.size() == 1) return constant(samples_.front().transpose());
    std::vector<Matrix> s;
    s.reserve(samples_.size());
    for (const auto& m : samples_) s.push_back(m.transpose());
    return sampled(T_, std::move(s));
}

TimeFunctionMatrix scalar_function(double value) { return TimeFunctionMatrix::constant(Matrix::Constant(1, 1, value)); }

double scalar_at(const TimeFunctionMatrix& f, double t) { return f(t)(0, 0); }

}  // namespace mflq
