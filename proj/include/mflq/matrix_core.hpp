#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace mflq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tolerance for the "M >= 0" relation.
inline constexpr double kPsdTol = 1e-9;
/// Default delta for the uniform relation "M >> 0" (M - delta*I >= 0).
inline constexpr double kUniformDelta = 1e-6;

/// Dense symmetric matrix. Construction symmetrizes by averaging with the
/// transpose; entries must be finite.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& m);

    static SymMatrix zero(Eigen::Index n);
    static SymMatrix identity(Eigen::Index n);

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& matrix() const { return m_; }
    operator const Matrix&() const { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Matrix m_;
};

/// Returns a + b (symmetric).
SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator*(double s, const SymMatrix& a);

/// Throws InvalidMatrix unless every entry of m is finite.
void require_finite(const Matrix& m, const char* what);

/// Smallest eigenvalue via a symmetric eigen-solve.
double min_eigenvalue(const SymMatrix& m);
/// Smallest eigenvalue of (m + m')/2 for a general square matrix.
double min_eigenvalue_sym(const Matrix& m);

bool is_psd(const SymMatrix& m, double tol = kPsdTol);

/// True iff min_k lambda_min(M_k - delta*I) >= 0. Throws EmptyGrid on an empty sequence.
bool is_uniformly_pd(std::span<const SymMatrix> grid, double delta = kUniformDelta);

struct SchurResult {
    bool via_complement = false;
    bool via_block = false;
};

/// Evaluates both sides of the Schur-complement equivalence for the block
/// matrix [[a, c], [c', b]]. Throws IndefiniteB if b is not positive
/// definite beyond tol.
SchurResult schur_psd(const SymMatrix& a, const Matrix& c, const SymMatrix& b, double tol = kPsdTol);

/// Assembles [[a, c], [c', b]].
SymMatrix block_matrix(const SymMatrix& a, const Matrix& c, const SymMatrix& b);

/// Block-diagonal weight quadruple: deviation block upper-left, mean block lower-right.
struct BlockQuadruple {
    SymMatrix Q;  // 2n x 2n
    Matrix S;     // 2n x 2m
    SymMatrix R;  // 2m x 2m
    SymMatrix G;  // 2n x 2n

    static BlockQuadruple assemble(const SymMatrix& q, const SymMatrix& qhat, const Matrix& s, const Matrix& shat,
                                   const SymMatrix& r, const SymMatrix& rhat, const SymMatrix& g,
                                   const SymMatrix& ghat);
    /// [[Q, S], [S', R]]
    SymMatrix joint() const { return block_matrix(Q, S, R); }
};

/// Largest absolute entry.
inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace mflq
