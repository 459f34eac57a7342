#pragma once

#include <cdgs/data.hpp>
#include <cdgs/linalg.hpp>

namespace cdgs::propagation {

/*
 * Harmonic solution with the first n_clamped rows of F fixed:
 *     F_free = -L_ff^{-1} L_fc F_clamped
 * which minimizes tr(F^T L F) under the clamp.
 */
inline Matrix harmonic_solve(const Matrix& L, const Matrix& F_clamped, Index n_clamped)
{
    const Index n = L.rows();
    if (L.cols() != n || F_clamped.rows() != n_clamped || n_clamped < 0 || n_clamped > n) {
        throw ShapeError("harmonic_solve: Laplacian and clamped label shapes disagree");
    }
    const Index n_free = n - n_clamped;
    const Matrix rhs = -L.bottomLeftCorner(n_free, n_clamped) * F_clamped;
    return linalg::solve_spd_linear(L.bottomRightCorner(n_free, n_free), rhs);
}

/// Row-wise argmax; ties go to the lowest class index.
inline Labels decide_labels(const Matrix& F)
{
    Labels out(static_cast<std::size_t>(F.rows()), 0);
    for (Index i = 0; i < F.rows(); ++i) {
        Index best = 0;
        for (Index c = 1; c < F.cols(); ++c) {
            if (F(i, c) > F(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = static_cast<Label>(best);
    }
    return out;
}

} // namespace cdgs::propagation
