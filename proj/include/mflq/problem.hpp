#pragma once

#include "mflq/matrix_core.hpp"
#include "mflq/time_function.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mflq {

/// Dynamics dX = [A X + Atilde EX + B u + Btilde Eu] dt
///             + sum_j [C_j X + Ctilde_j EX + D_j u + Dtilde_j Eu] dW_j.
struct CoefficientSet {
    int n = 0;
    int m = 0;
    int d = 0;
    TimeFunctionMatrix A, Atilde;  // n x n
    TimeFunctionMatrix B, Btilde;  // n x m
    std::vector<TimeFunctionMatrix> C, Ctilde;  // d entries, n x n
    std::vector<TimeFunctionMatrix> D, Dtilde;  // d entries, n x m
};

/// Cost E int [<QX,X> + 2<Su,X> + <Ru,u> + mean terms with the tilde weights] dt
///      + E<G X(T), X(T)> + <Gtilde EX(T), EX(T)> + 2<ell, EX(T)>.
/// S is stored without the factor 2.
struct WeightSet {
    TimeFunctionMatrix Q, Qtilde;  // n x n, symmetric samples
    TimeFunctionMatrix S, Stilde;  // n x m
    TimeFunctionMatrix R, Rtilde;  // m x m, symmetric samples
    SymMatrix G, Gtilde;
    std::optional<Vector> ell;
};

struct ProblemSpec {
    double T = 1.0;
    Vector x0;
    CoefficientSet coeffs;
    WeightSet weights;

    int n() const { return coeffs.n; }
    int m() const { return coeffs.m; }
    int d() const { return coeffs.d; }
};

/// Every coefficient and weight evaluated at one time, with the hatted sums.
struct PointCoefficients {
    double t = 0.0;
    Matrix A, Atilde, Ahat;
    Matrix B, Btilde, Bhat;
    std::vector<Matrix> C, Ctilde, Chat;
    std::vector<Matrix> D, Dtilde, Dhat;
    Matrix Q, Qtilde, Qhat;  // symmetric
    Matrix S, Stilde, Shat;
    Matrix R, Rtilde, Rhat;  // symmetric
};

/// Evaluates the spec at t. Throws OutOfDomain outside [0, T].
PointCoefficients evaluate_coefficients(const ProblemSpec& spec, double t);

struct HattedCoefficients {
    Matrix Ahat, Bhat;
    std::vector<Matrix> Chat, Dhat;
    SymMatrix Qhat;
    Matrix Shat;
    SymMatrix Rhat;
    SymMatrix Ghat;
};

HattedCoefficients hat_coefficients(const ProblemSpec& spec, double t);
SymMatrix terminal_hat(const ProblemSpec& spec);

BlockQuadruple bold_quadruple(const ProblemSpec& spec, double t);

/// Coefficients cached at the 2*steps+1 half-step points of a grid; entry i
/// sits at t = i*dt/2, so RK4 stages of step k use entries 2k, 2k+1, 2k+2.
class CoefficientTable {
public:
    CoefficientTable(const ProblemSpec& spec, const TimeGrid& grid);

    const TimeGrid& grid() const { return grid_; }
    const PointCoefficients& at_half(int i) const { return entries_[static_cast<std::size_t>(i)]; }
    const PointCoefficients& at_node(int k) const { return entries_[static_cast<std::size_t>(2 * k)]; }

private:
    TimeGrid grid_;
    std::vector<PointCoefficients> entries_;
};

struct PDReport {
    bool joint_ok = false;     // [[Q,S],[S',R]] >= -tol at every node
    bool control_ok = false;   // R - delta I >= 0 at every node
    bool terminal_ok = false;  // G >= -tol
    double joint_min = 0.0;
    double joint_worst_t = 0.0;
    double control_min = 0.0;  // smallest eigenvalue of the bold R over nodes
    double control_worst_t = 0.0;
    double terminal_min = 0.0;

    bool pass() const { return joint_ok && control_ok && terminal_ok; }
};

PDReport check_condition_pd(const ProblemSpec& spec, const TimeGrid& grid, double delta = kUniformDelta,
                            double tol = kPsdTol);

/// Human-readable violations of the dimension, symmetry and finiteness invariants.
std::vector<std::string> validate(const ProblemSpec& spec);

/// Throws ValidationError if validate() reports anything.
void require_valid(const ProblemSpec& spec);

}  // namespace mflq
