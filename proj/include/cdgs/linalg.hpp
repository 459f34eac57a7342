#pragma once

#include <cdgs/errors.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace cdgs {

// All dense operands are Eigen column-major doubles. Data matrices store one
// sample per column (m features x n samples).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace linalg {

// Relative size of the diagonal shift used to repair nominally definite
// matrices: eps * trace / k.
inline constexpr double ridge_eps = 1e-6;

struct EigenPair
{
    Vector values;   // ascending
    Matrix vectors;  // one generalized eigenvector per column
};

/// Squared Euclidean distances between the columns of Z.
template <class Derived>
Matrix pairwise_sq_dists(const Eigen::MatrixBase<Derived>& Z)
{
    const Index n = Z.cols();
    Matrix out = Matrix::Zero(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = j + 1; i < n; ++i) {
            const double v = (Z.col(i) - Z.col(j)).squaredNorm();
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

inline double ridge_size(const Matrix& A)
{
    const double scale = A.trace() / static_cast<double>(A.rows());
    return ridge_eps * ((scale > 0.0 && std::isfinite(scale)) ? scale : 1.0);
}

/*
 * Cholesky factorization with ridge repair. The ridge is added only when the
 * plain factorization fails or its smallest pivot falls below the ridge
 * magnitude, so well-conditioned inputs are factorized exactly.
 * Returns false when even the repaired matrix cannot be factorized.
 */
inline bool factorize_with_ridge(const Matrix& A, Eigen::LLT<Matrix>& llt, bool* ridged = nullptr)
{
    if (ridged) *ridged = false;
    if (!A.allFinite()) return false;
    const double ridge = ridge_size(A);
    llt.compute(A);
    if (llt.info() == Eigen::Success) {
        const double min_pivot = llt.matrixLLT().diagonal().minCoeff();
        if (min_pivot * min_pivot >= ridge) return true;
    }
    if (ridged) *ridged = true;
    Matrix repaired = A;
    repaired.diagonal().array() += ridge;
    llt.compute(repaired);
    return llt.info() == Eigen::Success;
}

/*
 * d smallest solutions of the symmetric-definite pencil A v = lambda B v.
 * A is symmetrized; B is reduced by its Cholesky factor B = G G^T to the
 * standard problem G^{-1} A G^{-T} y = lambda y, and v = G^{-T} y. The
 * returned vectors are B-orthonormal.
 */
inline EigenPair solve_sym_definite_geig(const Matrix& A, const Matrix& B, Index d)
{
    const Index n = A.rows();
    if (A.cols() != n || B.rows() != n || B.cols() != n) {
        throw DimensionError("pencil operands must be square and of equal size");
    }
    if (d < 1 || d > n) {
        throw DimensionError("requested " + std::to_string(d) + " eigenpairs of a "
                             + std::to_string(n) + "x" + std::to_string(n) + " pencil");
    }
    const Matrix Bs = 0.5 * (B + B.transpose());
    Eigen::LLT<Matrix> llt;
    if (!factorize_with_ridge(Bs, llt)) {
        throw SingularPencil("right-hand matrix is not positive definite after ridge repair");
    }
    const auto G = llt.matrixL();

    Matrix C = 0.5 * (A + A.transpose());
    G.solveInPlace(C);                                  // G^{-1} A
    Matrix Ct = C.transpose();
    G.solveInPlace(Ct);                                 // G^{-1} A G^{-T}
    Ct = (0.5 * (Ct + Ct.transpose())).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> es(Ct);
    if (es.info() != Eigen::Success) {
        throw SingularPencil("symmetric eigensolver did not converge");
    }
    EigenPair out;
    out.values = es.eigenvalues().head(d);
    Matrix Y = es.eigenvectors().leftCols(d);
    G.transpose().solveInPlace(Y);                      // v = G^{-T} y
    out.vectors = std::move(Y);
    return out;
}

/// Solves A X = B for symmetric positive-definite A.
inline Matrix solve_spd_linear(const Matrix& A, const Matrix& B)
{
    if (A.rows() != A.cols() || A.rows() != B.rows()) {
        throw DimensionError("solve_spd_linear: operand shapes do not agree");
    }
    if (A.rows() == 0) return Matrix(0, B.cols());
    Eigen::LLT<Matrix> llt;
    if (!factorize_with_ridge(0.5 * (A + A.transpose()), llt)) {
        throw SingularMatrix("Cholesky factorization failed after ridge repair");
    }
    return llt.solve(B);
}

} // namespace linalg
} // namespace cdgs
