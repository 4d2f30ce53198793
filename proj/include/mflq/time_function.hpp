#pragma once

#include "mflq/matrix_core.hpp"

#include <vector>

namespace mflq {

/// Uniform time grid t_k = k*T/steps, k = 0..steps.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps);

    double horizon() const { return T_; }
    int steps() const { return steps_; }
    int nodes() const { return steps_ + 1; }
    double dt() const { return T_ / steps_; }
    /// Node k; the last node is exactly T.
    double t(int k) const { return k == steps_ ? T_ : k * T_ / steps_; }
    /// Grid with twice as many steps; its even nodes coincide with this grid's nodes.
    TimeGrid refined(int factor = 2) const { return TimeGrid(T_, steps_ * factor); }

    bool operator==(const TimeGrid&) const = default;

private:
    double T_;
    int steps_;
};

/// Matrix-valued function of time: either constant, or uniformly sampled on
/// [0, T] with linear interpolation between samples.
class TimeFunctionMatrix {
public:
    TimeFunctionMatrix() = default;

    static TimeFunctionMatrix constant(Matrix value);
    static TimeFunctionMatrix zero(Eigen::Index rows, Eigen::Index cols);
    /// samples.size() >= 2; sample k sits at k*T/(samples.size()-1).
    static TimeFunctionMatrix sampled(double horizon, std::vector<Matrix> samples);
    /// Samples f at every node of grid.
    template <typename F>
    static TimeFunctionMatrix sample(const TimeGrid& grid, F&& f) {
        std::vector<Matrix> s;
        s.reserve(grid.nodes());
        for (int k = 0; k < grid.nodes(); ++k) s.push_back(f(grid.t(k)));
        return sampled(grid.horizon(), std::move(s));
    }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    bool is_constant() const { return samples_.size() == 1; }
    bool empty() const { return samples_.empty(); }
    /// Horizon of a sampled function (0 for constants).
    double horizon() const { return T_; }
    const std::vector<Matrix>& samples() const { return samples_; }

    /// Value at t. Sampled functions reproduce stored samples exactly at
    /// their nodes and extrapolate by clamping outside [0, T].
    Matrix operator()(double t) const;
    /// Evaluates into out without reallocating when shapes already match.
    void evaluate_into(double t, Matrix& out) const;

    /// Sample positions (count - 1 intervals) where the interpolant has kinks.
    std::vector<double> breakpoints(double horizon) const;

    TimeFunctionMatrix transposed() const;

private:
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    double T_ = 0.0;
    std::vector<Matrix> samples_;

    /// Locates t: lower index and weight of the upper sample.
    void locate(double t, std::size_t& i, double& w) const;
};

/// Scalar convenience: 1x1 constant.
TimeFunctionMatrix scalar_function(double value);
/// Evaluates a 1x1 function.
double scalar_at(const TimeFunctionMatrix& f, double t);

}  // namespace mflq
