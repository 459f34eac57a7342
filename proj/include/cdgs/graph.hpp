#pragma once

#include <cdgs/data.hpp>
#include <cdgs/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

namespace cdgs::graph {

inline constexpr double masked = std::numeric_limits<double>::infinity();

// Below this the closed-form denominator is treated as 0/0 and the block
// falls back to uniform weights.
inline constexpr double degenerate_denominator = 1e-12;

struct Edge
{
    Index col;
    double weight;
};

using Row = std::vector<Edge>;  // ascending column order

/*
 * A contiguous column range of one row that was solved as an independent
 * simplex block, together with the quadratic weight lambda that makes the
 * closed form the exact minimizer of  sum_j A_ij s_j + lambda ||s||^2.
 * lambda is 0 for blocks whose weights are forced (uniform over every
 * candidate) or degenerate.
 */
struct Block
{
    Index begin;
    Index end;
    double lambda;
};

using RowBlocks = std::vector<Block>;

/*
 * Row-sparse affinity matrix. Rows of source samples (i < n_s) carry two
 * blocks: same-class source columns with mass delta and target columns with
 * mass 1 - delta. All other rows carry one block spanning every column.
 */
struct AffinityGraph
{
    Index n = 0;
    Index n_s = 0;
    std::vector<Row> rows;
    std::vector<RowBlocks> blocks;

    Matrix dense() const
    {
        Matrix S = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            for (const auto& e : rows[i]) S(i, e.col) = e.weight;
        }
        return S;
    }

    double row_sum(Index i, Index begin = 0, Index end = -1) const
    {
        if (end < 0) end = n;
        double s = 0.0;
        for (const auto& e : rows[i]) {
            if (e.col >= begin && e.col < end) s += e.weight;
        }
        return s;
    }

    double weight(Index i, Index j) const
    {
        const auto& r = rows[i];
        auto it = std::lower_bound(r.begin(), r.end(), j, [](const Edge& e, Index c) { return e.col < c; });
        return (it != r.end() && it->col == j) ? it->weight : 0.0;
    }
};

/// A_ij = ||z_i - z_j||^2 + beta ||F_i - F_j||^2, with +inf between source samples of different classes.
struct CostMatrix
{
    Matrix values;
};

/*
 * Z is d x n (projected samples as columns), F is n x C. Pass an empty
 * source_labels to skip the cross-class mask.
 */
inline CostMatrix affinity_cost(const Matrix& Z, const Matrix& F, double beta, const Labels& source_labels)
{
    const Index n = Z.cols();
    if (F.rows() != n && !(beta == 0.0 && F.size() == 0)) {
        throw ShapeError("affinity_cost: F has " + std::to_string(F.rows()) + " rows for "
                         + std::to_string(n) + " samples");
    }
    if (static_cast<Index>(source_labels.size()) > n) {
        throw ShapeError("affinity_cost: more source labels than samples");
    }
    CostMatrix A{linalg::pairwise_sq_dists(Z)};
    if (beta != 0.0) A.values += beta * linalg::pairwise_sq_dists(F.transpose());
    const auto n_s = static_cast<Index>(source_labels.size());
    for (Index j = 0; j < n_s; ++j) {
        for (Index i = 0; i < n_s; ++i) {
            if (source_labels[i] != source_labels[j]) A.values(i, j) = masked;
        }
    }
    return A;
}

struct BlockSolution
{
    Row edges;
    double lambda = 0.0;
};

/*
 * Closed-form solution of
 *     min_s  sum_j a_j s_j + lambda ||s||^2   s.t.  sum_j s_j = mass, s >= 0
 * over the given candidate columns, with lambda chosen so that exactly the k
 * cheapest candidates receive weight:
 *     s_j = mass * max((a_(k+1) - a_j) / (k a_(k+1) - sum_{l<=k} a_(l)), 0)
 *     lambda = (k a_(k+1) - sum_{l<=k} a_(l)) / (2 mass)
 * where a_(l) is the l-th smallest cost. Ties sort by column. When k covers
 * every candidate the block is uniform over all of them.
 */
inline BlockSolution solve_block(std::span<const double> costs, std::vector<Index> candidates, Index k,
                                 double mass)
{
    BlockSolution out;
    const auto q = static_cast<Index>(candidates.size());
    if (mass <= 0.0 || q == 0 || k < 1) return out;

    auto less = [&](Index a, Index b) {
        return costs[a] < costs[b] || (costs[a] == costs[b] && a < b);
    };
    if (k >= q) {
        std::sort(candidates.begin(), candidates.end());
        for (Index j : candidates) out.edges.push_back({j, mass / static_cast<double>(q)});
        return out;
    }
    std::partial_sort(candidates.begin(), candidates.begin() + k + 1, candidates.end(), less);
    const double next = costs[candidates[k]];
    double head = 0.0;
    for (Index l = 0; l < k; ++l) head += costs[candidates[l]];
    const double denom = static_cast<double>(k) * next - head;

    if (!(denom > degenerate_denominator) || !std::isfinite(denom)) {
        for (Index l = 0; l < k; ++l) out.edges.push_back({candidates[l], mass / static_cast<double>(k)});
    } else {
        for (Index l = 0; l < k; ++l) {
            const double w = mass * std::max((next - costs[candidates[l]]) / denom, 0.0);
            if (w > 0.0) out.edges.push_back({candidates[l], w});
        }
        out.lambda = denom / (2.0 * mass);
    }
    std::sort(out.edges.begin(), out.edges.end(), [](const Edge& a, const Edge& b) { return a.col < b.col; });
    return out;
}

struct RowSet
{
    Index first = 0;
    std::vector<Row> rows;
    std::vector<RowBlocks> blocks;
};

namespace detail {

inline std::span<const double> row_of(const Matrix& A, Index i, std::vector<double>& scratch)
{
    scratch.resize(static_cast<std::size_t>(A.cols()));
    for (Index j = 0; j < A.cols(); ++j) scratch[j] = A(i, j);
    return scratch;
}

inline void append(Row& dst, const Row& src)
{
    dst.insert(dst.end(), src.begin(), src.end());
}

} // namespace detail

/*
 * Rows i >= first solved as a single simplex block over every finite column
 * except i. With first = n_s this is the target-row update; with first = 0 it
 * builds an unstructured graph.
 */
inline RowSet update_target_rows(const CostMatrix& A, Index k, Index first)
{
    const Index n = A.values.rows();
    RowSet out;
    out.first = first;
    std::vector<double> scratch;
    std::vector<Index> cand;
    for (Index i = first; i < n; ++i) {
        const auto costs = detail::row_of(A.values, i, scratch);
        cand.clear();
        for (Index j = 0; j < n; ++j) {
            if (j != i && std::isfinite(costs[j])) cand.push_back(j);
        }
        auto sol = solve_block(costs, cand, k, 1.0);
        out.rows.push_back(std::move(sol.edges));
        out.blocks.push_back({Block{0, n, sol.lambda}});
    }
    return out;
}

/*
 * Source rows: same-class source columns (self excluded, so at most
 * n_s^c - 1 candidates) carry mass delta; every target column is a candidate
 * for the remaining 1 - delta. A class with a single source sample has no
 * same-class candidate, and its delta mass moves to the target block.
 */
inline RowSet update_source_rows(const CostMatrix& A, Index k, double delta, const Labels& source_labels)
{
    const Index n = A.values.rows();
    const auto n_s = static_cast<Index>(source_labels.size());
    RowSet out;
    out.first = 0;
    std::vector<double> scratch;
    std::vector<Index> src;
    std::vector<Index> tgt;
    for (Index i = 0; i < n_s; ++i) {
        const auto costs = detail::row_of(A.values, i, scratch);
        src.clear();
        tgt.clear();
        for (Index j = 0; j < n_s; ++j) {
            if (j != i && source_labels[j] == source_labels[i] && std::isfinite(costs[j])) src.push_back(j);
        }
        for (Index j = n_s; j < n; ++j) tgt.push_back(j);
        const double src_mass = src.empty() ? 0.0 : delta;
        auto s = solve_block(costs, src, k, src_mass);
        auto t = solve_block(costs, tgt, k, 1.0 - src_mass);
        Row row = std::move(s.edges);
        detail::append(row, t.edges);
        out.rows.push_back(std::move(row));
        out.blocks.push_back({Block{0, n_s, s.lambda}, Block{n_s, n, t.lambda}});
    }
    return out;
}

inline void apply(AffinityGraph& S, RowSet&& rs)
{
    for (std::size_t r = 0; r < rs.rows.size(); ++r) {
        const auto i = rs.first + static_cast<Index>(r);
        S.rows[i] = std::move(rs.rows[r]);
        S.blocks[i] = std::move(rs.blocks[r]);
    }
}

/*
 * Full graph update from a cost matrix. With discriminative = false every row
 * (source rows included) is a single block over all columns and any mask in
 * A is ignored by construction of the caller's cost.
 */
inline AffinityGraph learn_graph(const CostMatrix& A, Index k, double delta, const Labels& source_labels,
                                 bool discriminative = true)
{
    AffinityGraph S;
    S.n = A.values.rows();
    S.n_s = static_cast<Index>(source_labels.size());
    S.rows.resize(S.n);
    S.blocks.resize(S.n);
    if (discriminative) {
        apply(S, update_source_rows(A, k, delta, source_labels));
        apply(S, update_target_rows(A, k, S.n_s));
    } else {
        apply(S, update_target_rows(A, k, 0));
    }
    return S;
}

/// Initial graph from raw-feature distances (no label term).
inline AffinityGraph init_graph(const Matrix& X, Index k, double delta, const Labels& source_labels,
                                bool discriminative = true)
{
    const CostMatrix A = affinity_cost(X, Matrix(), 0.0, discriminative ? source_labels : Labels{});
    AffinityGraph S = learn_graph(A, k, delta, source_labels, discriminative);
    S.n_s = static_cast<Index>(source_labels.size());
    return S;
}

/*
 * Predefined k-NN graph with Gaussian weights exp(-||z_i - z_j||^2 / (2 width^2)),
 * each row normalized to sum 1. Used by the decoupled ablation.
 */
inline AffinityGraph gaussian_knn_graph(const Matrix& Z, Index k, double width, Index n_s)
{
    const Index n = Z.cols();
    const Matrix D = linalg::pairwise_sq_dists(Z);
    AffinityGraph S;
    S.n = n;
    S.n_s = n_s;
    S.rows.resize(n);
    S.blocks.assign(n, RowBlocks{Block{0, n, 0.0}});
    std::vector<Index> cand;
    for (Index i = 0; i < n; ++i) {
        cand.clear();
        for (Index j = 0; j < n; ++j) {
            if (j != i) cand.push_back(j);
        }
        const Index kk = std::min<Index>(k, static_cast<Index>(cand.size()));
        std::partial_sort(cand.begin(), cand.begin() + kk, cand.end(), [&](Index a, Index b) {
            return D(i, a) < D(i, b) || (D(i, a) == D(i, b) && a < b);
        });
        Row row;
        double total = 0.0;
        for (Index l = 0; l < kk; ++l) {
            const double w = std::exp(-D(i, cand[l]) / (2.0 * width * width));
            row.push_back({cand[l], w});
            total += w;
        }
        for (auto& e : row) e.weight = total > 0.0 ? e.weight / total : 1.0 / static_cast<double>(kk);
        std::sort(row.begin(), row.end(), [](const Edge& a, const Edge& b) { return a.col < b.col; });
        S.rows[i] = std::move(row);
    }
    return S;
}

/// Per-row, per-block quadratic weights: sum_i sum_b lambda_ib ||S_{i,b}||^2.
inline double regularizer(const AffinityGraph& S, const std::vector<RowBlocks>& weights)
{
    double total = 0.0;
    for (Index i = 0; i < S.n; ++i) {
        for (const auto& b : weights[i]) {
            if (b.lambda == 0.0) continue;
            double sq = 0.0;
            for (const auto& e : S.rows[i]) {
                if (e.col >= b.begin && e.col < b.end) sq += e.weight * e.weight;
            }
            total += b.lambda * sq;
        }
    }
    return total;
}

struct Laplacian
{
    Matrix W;          // (S + S^T) / 2
    Matrix L;          // D - W
    double frobenius;  // ||L||_F

    /// L / ||L||_F, the form used next to the unit-norm MMD matrix.
    Matrix scaled() const { return frobenius > 0.0 ? Matrix(L / frobenius) : L; }
    double scale() const { return frobenius > 0.0 ? 1.0 / frobenius : 1.0; }
};

inline Laplacian laplacian(const AffinityGraph& S)
{
    Laplacian out;
    const Matrix dense = S.dense();
    out.W = 0.5 * (dense + dense.transpose());
    out.L = -out.W;
    out.L.diagonal() += out.W.rowwise().sum();
    out.frobenius = out.L.norm();
    return out;
}

/// Debug export: one "i j w" line per edge, sorted by (i, j), 12 significant digits.
inline void export_edges(std::ostream& out, const AffinityGraph& S)
{
    const auto old = out.precision(12);
    for (Index i = 0; i < S.n; ++i) {
        for (const auto& e : S.rows[i]) out << i << ' ' << e.col << ' ' << e.weight << '\n';
    }
    out.precision(old);
}

} // namespace cdgs::graph
