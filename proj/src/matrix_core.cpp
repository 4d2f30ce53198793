#include "mflq/matrix_core.hpp"

#include "mflq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mflq {

SymMatrix::SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
        throw InvalidMatrix("symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
    }
    require_finite(m, "symmetric matrix");
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

SymMatrix SymMatrix::identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) { return SymMatrix(a.matrix() + b.matrix()); }

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) { return SymMatrix(a.matrix() - b.matrix()); }

SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.matrix()); }

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw InvalidMatrix(std::string(what) + " has non-finite entries");
}

double min_eigenvalue(const SymMatrix& m) {
    if (m.dim() == 0) return std::numeric_limits<double>::infinity();
    require_finite(m.matrix(), "matrix");
    if (m.dim() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix(), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double min_eigenvalue_sym(const Matrix& m) { return min_eigenvalue(SymMatrix(m)); }

bool is_psd(const SymMatrix& m, double tol) { return min_eigenvalue(m) >= -tol; }

bool is_uniformly_pd(std::span<const SymMatrix> grid, double delta) {
    if (grid.empty()) throw EmptyGrid();
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& m : grid) worst = std::min(worst, min_eigenvalue(m) - delta);
    return worst >= 0.0;
}

SymMatrix block_matrix(const SymMatrix& a, const Matrix& c, const SymMatrix& b) {
    const auto n = a.dim();
    const auto m = b.dim();
    if (c.rows() != n || c.cols() != m) throw InvalidMatrix("block_matrix: off-diagonal block has wrong shape");
    Matrix out(n + m, n + m);
    out.topLeftCorner(n, n) = a.matrix();
    out.topRightCorner(n, m) = c;
    out.bottomLeftCorner(m, n) = c.transpose();
    out.bottomRightCorner(m, m) = b.matrix();
    return SymMatrix(out);
}

SchurResult schur_psd(const SymMatrix& a, const Matrix& c, const SymMatrix& b, double tol) {
    require_finite(c, "Schur off-diagonal block");
    const double bmin = min_eigenvalue(b);
    if (!(bmin > tol)) throw IndefiniteB(bmin);

    SchurResult out;
    Eigen::LLT<Matrix> llt(b.matrix());
    const Matrix complement = a.matrix() - c * llt.solve(c.transpose());
    out.via_complement = is_psd(SymMatrix(complement), tol);
    out.via_block = is_psd(block_matrix(a, c, b), tol);
    return out;
}

BlockQuadruple BlockQuadruple::assemble(const SymMatrix& q, const SymMatrix& qhat, const Matrix& s, const Matrix& shat,
                                        const SymMatrix& r, const SymMatrix& rhat, const SymMatrix& g,
                                        const SymMatrix& ghat) {
    const auto n = q.dim();
    const auto m = r.dim();
    Matrix bq = Matrix::Zero(2 * n, 2 * n);
    Matrix bs = Matrix::Zero(2 * n, 2 * m);
    Matrix br = Matrix::Zero(2 * m, 2 * m);
    Matrix bg = Matrix::Zero(2 * n, 2 * n);
    bq.topLeftCorner(n, n) = q.matrix();
    bq.bottomRightCorner(n, n) = qhat.matrix();
    bs.topLeftCorner(n, m) = s;
    bs.bottomRightCorner(n, m) = shat;
    br.topLeftCorner(m, m) = r.matrix();
    br.bottomRightCorner(m, m) = rhat.matrix();
    bg.topLeftCorner(n, n) = g.matrix();
    bg.bottomRightCorner(n, n) = ghat.matrix();
    return BlockQuadruple{SymMatrix(bq), bs, SymMatrix(br), SymMatrix(bg)};
}

}  // namespace mflq
