#pragma once

#include <cdgs/data.hpp>
#include <cdgs/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace cdgs::baselines {

/// 1-NN by Euclidean distance; ties go to the lowest training index.
inline Labels nearest_neighbor(const Matrix& train, const Labels& train_labels, const Matrix& test)
{
    if (train.cols() < 1) throw ShapeError("nearest_neighbor needs at least one training sample");
    if (static_cast<Index>(train_labels.size()) != train.cols()) {
        throw ShapeError("nearest_neighbor: label count differs from training sample count");
    }
    if (test.rows() != train.rows()) throw ShapeError("nearest_neighbor: feature dimensions differ");
    Labels out(static_cast<std::size_t>(test.cols()));
    for (Index q = 0; q < test.cols(); ++q) {
        Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Index p = 0; p < train.cols(); ++p) {
            const double d = (train.col(p) - test.col(q)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        out[static_cast<std::size_t>(q)] = train_labels[static_cast<std::size_t>(best)];
    }
    return out;
}

namespace detail {

// Euclidean projection onto {s >= 0, sum s = mass}.
inline void project_simplex(std::vector<double>& v, double mass)
{
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - mass) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) tau = t;
    }
    for (auto& x : v) x = std::max(x - tau, 0.0);
}

} // namespace detail

struct QpResult
{
    std::vector<double> weights;
    double lambda = 0.0;
    int iterations = 0;
};

/*
 * Independent check for the closed-form graph rows. Solves
 *     min_s  sum_j c_j s_j + lambda sum_j s_j^2   s.t.  sum_j s_j = mass, s >= 0
 * by projected gradient with step 1/(2 lambda), where
 *     lambda = (K c_(K+1) - sum_{l<=K} c_(l)) / (2 mass)
 * for K = max_support (the quadratic weight at which the optimum has exactly
 * K nonzeros). Infinite costs are excluded and get weight 0. When K covers
 * every finite candidate the optimum is the uniform limit lambda -> inf.
 */
inline QpResult simplex_qp_oracle(const std::vector<double>& costs, double mass, std::size_t max_support,
                                  int max_iter = 10000, double tol = 1e-8)
{
    if (!(mass > 0.0)) throw ArgumentError("simplex_qp_oracle needs positive mass");
    if (max_support < 1) throw ArgumentError("simplex_qp_oracle needs max_support >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < costs.size(); ++j) {
        if (std::isfinite(costs[j])) idx.push_back(j);
    }
    if (idx.empty()) throw ArgumentError("simplex_qp_oracle needs at least one finite cost");
    QpResult out;
    out.weights.assign(costs.size(), 0.0);
    const std::size_t q = idx.size();
    if (max_support >= q) {
        for (auto j : idx) out.weights[j] = mass / static_cast<double>(q);
        out.lambda = std::numeric_limits<double>::infinity();
        return out;
    }
    std::vector<double> sorted;
    for (auto j : idx) sorted.push_back(costs[j]);
    std::sort(sorted.begin(), sorted.end());
    const double head = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(max_support), 0.0);
    const double lambda = (static_cast<double>(max_support) * sorted[max_support] - head) / (2.0 * mass);
    if (!(lambda > 0.0)) throw ConvergenceError("quadratic weight is not positive (tied costs)");
    out.lambda = lambda;

    const double step = 1.0 / (2.0 * lambda);
    std::vector<double> s(q, mass / static_cast<double>(q));
    std::vector<double> next(q);
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t j = 0; j < q; ++j) next[j] = s[j] - step * (costs[idx[j]] + 2.0 * lambda * s[j]);
        detail::project_simplex(next, mass);
        double change = 0.0;
        for (std::size_t j = 0; j < q; ++j) change = std::max(change, std::abs(next[j] - s[j]));
        s.swap(next);
        out.iterations = it;
        if (change <= tol * mass) {
            for (std::size_t j = 0; j < q; ++j) out.weights[idx[j]] = s[j];
            return out;
        }
    }
    throw ConvergenceError("projected gradient did not reach stationarity in "
                           + std::to_string(max_iter) + " iterations");
}

} // namespace cdgs::baselines
