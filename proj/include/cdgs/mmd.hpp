#pragma once

#include <cdgs/data.hpp>
#include <cdgs/linalg.hpp>

#include <vector>

namespace cdgs::mmd {

// An MMD matrix is a dense symmetric n x n matrix over the joint sample set
// ordered [source | target]. Each class term is v v^T for a signed indicator
// vector v, so every MMD matrix is PSD with zero row sums.
using MmdMatrix = Matrix;

/// Marginal discrepancy: tr(Z M0 Z^T) = ||mean(Z_s) - mean(Z_t)||^2.
inline MmdMatrix marginal_mmd(Index n_s, Index n_t)
{
    if (n_s < 1 || n_t < 1) throw ArgumentError("marginal_mmd needs n_s >= 1 and n_t >= 1");
    const Index n = n_s + n_t;
    Vector v(n);
    v.head(n_s).setConstant(1.0 / static_cast<double>(n_s));
    v.tail(n_t).setConstant(-1.0 / static_cast<double>(n_t));
    return v * v.transpose();
}

/*
 * Sum over classes of the per-class discrepancy matrices, with target classes
 * taken from (pseudo-)labels. A class absent from either domain contributes
 * nothing.
 */
inline MmdMatrix conditional_mmd(const Labels& source_labels, const Labels& target_labels, int num_classes)
{
    const auto n_s = static_cast<Index>(source_labels.size());
    const auto n_t = static_cast<Index>(target_labels.size());
    const Index n = n_s + n_t;
    std::vector<Index> cs(num_classes, 0);
    std::vector<Index> ct(num_classes, 0);
    auto tally = [num_classes](const Labels& ls, std::vector<Index>& counts) {
        for (Label y : ls) {
            if (y < 0 || y >= num_classes) {
                throw LabelError("label " + std::to_string(y) + " outside [0,"
                                 + std::to_string(num_classes) + ")");
            }
            ++counts[y];
        }
    };
    tally(source_labels, cs);
    tally(target_labels, ct);

    MmdMatrix M = MmdMatrix::Zero(n, n);
    Vector v(n);
    for (int c = 0; c < num_classes; ++c) {
        if (cs[c] == 0 || ct[c] == 0) continue;
        v.setZero();
        for (Index i = 0; i < n_s; ++i) {
            if (source_labels[i] == c) v(i) = 1.0 / static_cast<double>(cs[c]);
        }
        for (Index j = 0; j < n_t; ++j) {
            if (target_labels[j] == c) v(n_s + j) = -1.0 / static_cast<double>(ct[c]);
        }
        M.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    return M;
}

/// (M0 + Mc) scaled to unit Frobenius norm; zero stays zero.
inline MmdMatrix combined_mmd(const MmdMatrix& M0, const MmdMatrix& Mc)
{
    if (M0.rows() != Mc.rows() || M0.cols() != Mc.cols()) {
        throw ShapeError("combined_mmd operands differ in shape");
    }
    MmdMatrix M = M0 + Mc;
    const double norm = M.norm();
    if (norm > 0.0) M /= norm;
    return M;
}

} // namespace cdgs::mmd
