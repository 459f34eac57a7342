#pragma once

#include <cdgs/data.hpp>
#include <cdgs/graph.hpp>
#include <cdgs/linalg.hpp>
#include <cdgs/mmd.hpp>
#include <cdgs/propagation.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace cdgs {

// Early-stopping thresholds.
inline constexpr double label_change_tol = 1e-3;
inline constexpr double objective_change_tol = 1e-5;

// Kernel width of the predefined graph used by the decoupled ablation.
inline constexpr double predefined_kernel_width = 1.0;

/// X H X^T with H the centering matrix, i.e. the scatter of the centered samples.
inline Matrix centered_scatter(const Matrix& X)
{
    const Matrix Xc = X.colwise() - X.rowwise().mean();
    return Xc * Xc.transpose();
}

/// max |P^T X H X^T P - I|.
inline double variance_residual(const Matrix& P, const Matrix& X)
{
    const Matrix G = P.transpose() * centered_scatter(X) * P;
    return (G - Matrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

/*
 * Projection step: the d smallest generalized eigenvectors of
 *     (X M X^T + alpha X L X^T + gamma I) p = theta X H X^T p.
 * L_scaled may be empty, which drops the graph term.
 */
inline Matrix solve_projection(const Matrix& X, const Matrix& M, const Matrix& L_scaled, double alpha,
                               double gamma, Index d)
{
    const Index n = X.cols();
    if (M.rows() != n || M.cols() != n || (L_scaled.size() != 0 && (L_scaled.rows() != n || L_scaled.cols() != n))) {
        throw ShapeError("solve_projection: MMD or Laplacian size differs from sample count");
    }
    Matrix A = X * M * X.transpose();
    if (L_scaled.size() != 0 && alpha != 0.0) A += alpha * (X * L_scaled * X.transpose());
    A.diagonal().array() += gamma;
    return linalg::solve_sym_definite_geig(A, centered_scatter(X), d).vectors;
}

/*
 * Value of the joint objective
 *     tr(P^T X M X^T P) + alpha (tr(P^T X Lg X^T P) + ||Lambda S||_F^2)
 *       + beta tr(F^T Lg F) + gamma ||P||_F^2
 * with Lg = graph_scale * L, L = D - (S + S^T)/2, and
 *     ||Lambda S||_F^2 = (graph_scale / 2) sum_i sum_b lambda_ib ||S_{i,b}||^2
 * over the row blocks in `lambda`. Under this scaling each of the three
 * alternating updates is the exact minimizer of its own block.
 */
struct ObjectiveTerms
{
    double mmd = 0.0;
    double graph_trace = 0.0;
    double regularizer = 0.0;
    double label_trace = 0.0;
    double projection = 0.0;
    double total = 0.0;
};

inline ObjectiveTerms objective_terms(const Matrix& P, const graph::AffinityGraph& S, const Matrix& F,
                                      const Matrix& X, const Matrix& M, double alpha, double beta, double gamma,
                                      double graph_scale, const std::vector<graph::RowBlocks>& lambda)
{
    const Index n = X.cols();
    if (S.n != n || M.rows() != n || P.rows() != X.rows() || (F.size() != 0 && F.rows() != n)
        || static_cast<Index>(lambda.size()) != n) {
        throw ShapeError("objective: operand shapes disagree");
    }
    const auto lap = graph::laplacian(S);
    const Matrix Z = P.transpose() * X;
    ObjectiveTerms t;
    t.mmd = (Z * M * Z.transpose()).trace();
    t.graph_trace = graph_scale * (Z * lap.L * Z.transpose()).trace();
    t.regularizer = 0.5 * graph_scale * graph::regularizer(S, lambda);
    t.label_trace = F.size() == 0 ? 0.0 : graph_scale * (F.transpose() * lap.L * F).trace();
    t.projection = P.squaredNorm();
    t.total = t.mmd + alpha * (t.graph_trace + t.regularizer) + beta * t.label_trace + gamma * t.projection;
    return t;
}

inline double objective(const Matrix& P, const graph::AffinityGraph& S, const Matrix& F, const Matrix& X,
                        const Matrix& M, double alpha, double beta, double gamma, double graph_scale,
                        const std::vector<graph::RowBlocks>& lambda)
{
    return objective_terms(P, S, F, X, M, alpha, beta, gamma, graph_scale, lambda).total;
}

/*
 * Convenience form: lambda is recomputed from the current cost matrix and the
 * graph scale is 1 / ||L(S)||_F.
 */
inline double objective(const Matrix& P, const graph::AffinityGraph& S, const Matrix& F, const Matrix& X,
                        const Matrix& M, double alpha, double beta, double gamma, const Labels& source_labels,
                        Index k, double delta)
{
    const Matrix Z = P.transpose() * X;
    const auto A = graph::affinity_cost(Z, F, beta / alpha, source_labels);
    const auto fresh = graph::learn_graph(A, k, delta, source_labels);
    return objective(P, S, F, X, M, alpha, beta, gamma, graph::laplacian(S).scale(), fresh.blocks);
}

struct FitState
{
    Matrix P;                      // m x d
    graph::AffinityGraph S;
    Matrix F;                      // n x C, clamped rows one-hot
    Labels pseudo;                 // unlabeled target block
    Matrix M;                      // current unit-norm MMD matrix
    int iteration = 0;
    double graph_scale = 1.0;      // 1 / ||L||_F frozen at the projection step
    std::vector<double> objective_trace;
    std::vector<double> label_change_trace;
    std::vector<double> accuracy_trace;
    Index isolated_nodes = 0;
};

struct FitReport
{
    Labels pseudo_labels;
    std::optional<double> accuracy;
    int iterations_run = 0;
    bool converged = false;
    std::vector<double> objective_trace;
    std::vector<double> label_change_trace;
    std::vector<double> accuracy_trace;
    Index isolated_nodes = 0;
};

enum class Stage { init, mmd, projection, graph, labels, iteration };

struct FitOptions
{
    std::ostream* log = nullptr;    // per-iteration CSV
    std::ostream* warn = nullptr;   // diagnostics
    std::function<void(Stage, const FitState&)> observer;
};

/*
 * Alternating solver. Each update is exposed separately so the individual
 * steps can be inspected; run() drives the whole loop.
 */
class Solver
{
public:
    Solver(const Dataset& data, const HyperParams& params, FitOptions options = {})
        : data_(data), params_(params), options_(std::move(options))
    {
        data_.validate();
        params_.validate(data_);
        d_ = params_.subspace_dim(data_);
        n_clamped_ = data_.n_s + data_.n_l;
        clamped_ = one_hot(data_.clamped_labels(), data_.num_classes);
        truth_ = data_.unlabeled_truth();
    }

    const FitState& state() const { return state_; }
    const Dataset& data() const { return data_; }
    const HyperParams& params() const { return params_; }

    bool discriminative() const { return params_.ablation != Ablation::dg; }
    bool decoupled() const { return params_.ablation == Ablation::sp; }

    /// Weight of the label term in the graph cost (relative to the feature term).
    double graph_label_weight() const
    {
        if (params_.ablation == Ablation::full) return params_.beta / params_.alpha;
        return 0.0;
    }

    /// Initial graph on raw features followed by one propagation to seed pseudo-labels.
    void initialize()
    {
        const Matrix& X = data_.features;
        state_ = FitState{};
        state_.S = decoupled()
            ? graph::gaussian_knn_graph(X, params_.k, predefined_kernel_width, data_.n_s)
            : graph::init_graph(X, params_.k, params_.delta, data_.source_labels, discriminative());
        state_.F = Matrix::Zero(data_.n(), data_.num_classes);
        state_.F.topRows(n_clamped_) = clamped_;
        propagate();
        notify(Stage::init);
    }

    void update_mmd()
    {
        Labels target = data_.labeled_target_labels;
        target.insert(target.end(), state_.pseudo.begin(), state_.pseudo.end());
        state_.M = mmd::combined_mmd(mmd::marginal_mmd(data_.n_s, data_.n_t()),
                                     mmd::conditional_mmd(data_.source_labels, target, data_.num_classes));
        notify(Stage::mmd);
    }

    void update_projection()
    {
        const auto lap = graph::laplacian(state_.S);
        state_.graph_scale = lap.scale();
        state_.P = decoupled()
            ? solve_projection(data_.features, state_.M, Matrix(), 0.0, params_.gamma, d_)
            : solve_projection(data_.features, state_.M, lap.scaled(), params_.alpha, params_.gamma, d_);
        notify(Stage::projection);
    }

    /// Graph the S-step would produce at the current P and F.
    graph::AffinityGraph propose_graph() const
    {
        const Matrix Z = state_.P.transpose() * data_.features;
        if (decoupled()) {
            return graph::gaussian_knn_graph(Z, params_.k, predefined_kernel_width, data_.n_s);
        }
        const auto A = graph::affinity_cost(Z, state_.F, graph_label_weight(),
                                            discriminative() ? data_.source_labels : Labels{});
        auto S = graph::learn_graph(A, params_.k, params_.delta, data_.source_labels, discriminative());
        return S;
    }

    void update_graph()
    {
        state_.S = propose_graph();
        notify(Stage::graph);
    }

    void update_labels()
    {
        propagate();
        notify(Stage::labels);
    }

    /// Objective at the current state with this iteration's frozen scale and the current graph's weights.
    double evaluate_objective() const
    {
        return objective_at(state_.P, state_.S, state_.F, state_.S.blocks);
    }

    double objective_at(const Matrix& P, const graph::AffinityGraph& S, const Matrix& F,
                        const std::vector<graph::RowBlocks>& lambda) const
    {
        return objective(P, S, F, data_.features, state_.M, params_.alpha, params_.beta, params_.gamma,
                         state_.graph_scale, lambda);
    }

    /// One full alternating pass. Returns true once a stopping criterion fires.
    bool iterate()
    {
        const Labels before = state_.pseudo;
        update_mmd();
        update_projection();
        update_graph();
        update_labels();
        ++state_.iteration;

        std::size_t changed = 0;
        for (std::size_t i = 0; i < before.size(); ++i) changed += (before[i] != state_.pseudo[i]);
        const double change = before.empty() ? 0.0 : static_cast<double>(changed) / static_cast<double>(before.size());
        const double J = evaluate_objective();
        const bool have_prev = !state_.objective_trace.empty();
        const double prev = have_prev ? state_.objective_trace.back() : 0.0;
        state_.objective_trace.push_back(J);
        state_.label_change_trace.push_back(change);
        std::optional<double> acc;
        if (truth_) {
            acc = accuracy(state_.pseudo, *truth_);
            state_.accuracy_trace.push_back(*acc);
        }
        if (options_.log) {
            auto& log = *options_.log;
            if (state_.iteration == 1) log << "iter,objective,label_change_fraction,accuracy\n";
            const auto old = log.precision(12);
            log << state_.iteration << ',' << J << ',' << change << ',';
            if (acc) log << *acc;
            log << '\n';
            log.precision(old);
        }
        notify(Stage::iteration);

        if (change < label_change_tol) return true;
        if (have_prev) {
            const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
            if (std::abs(J - prev) / denom < objective_change_tol) return true;
        }
        return false;
    }

    FitReport run()
    {
        initialize();
        bool converged = false;
        while (!converged && state_.iteration < params_.T) converged = iterate();
        FitReport r;
        r.pseudo_labels = state_.pseudo;
        if (truth_) r.accuracy = accuracy(state_.pseudo, *truth_);
        r.iterations_run = state_.iteration;
        r.converged = converged;
        r.objective_trace = state_.objective_trace;
        r.label_change_trace = state_.label_change_trace;
        r.accuracy_trace = state_.accuracy_trace;
        r.isolated_nodes = state_.isolated_nodes;
        return r;
    }

private:
    void propagate()
    {
        const auto lap = graph::laplacian(state_.S);
        Index isolated = 0;
        for (Index i = n_clamped_; i < data_.n(); ++i) isolated += (lap.W.row(i).sum() <= 0.0);
        state_.isolated_nodes = isolated;
        if (isolated > 0 && options_.warn) {
            *options_.warn << "warning: " << isolated
                           << " unlabeled node(s) have no edges; their labels default to class 0\n";
        }
        state_.F.bottomRows(data_.n() - n_clamped_) = propagation::harmonic_solve(lap.L, clamped_, n_clamped_);
        const Matrix free = state_.F.bottomRows(data_.n_u);
        state_.pseudo = propagation::decide_labels(free);
    }

    void notify(Stage s)
    {
        if (options_.observer) options_.observer(s, state_);
    }

    Dataset data_;
    HyperParams params_;
    FitOptions options_;
    Index d_ = 0;
    Index n_clamped_ = 0;
    Matrix clamped_;
    std::optional<Labels> truth_;
    FitState state_;
};

inline FitReport fit(const Dataset& data, const HyperParams& params, FitOptions options = {})
{
    return Solver(data, params, std::move(options)).run();
}

} // namespace cdgs
