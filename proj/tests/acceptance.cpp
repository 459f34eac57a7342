// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace cdgs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
    bool pass = true;
    std::string detail;
};

Outcome fail(std::string why) { return {false, std::move(why)}; }

std::string sci(double v)
{
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << v;
    return os.str();
}

std::string fmt(double v, int digits = 4)
{
    std::ostringstream os;
    os.precision(digits);
    os << std::fixed << v;
    return os.str();
}

Matrix laplacian_of(const Matrix& W)
{
    Matrix L = -W;
    L.diagonal() += W.rowwise().sum();
    return L;
}

Labels random_labels(Rng& rng, Index n, int C)
{
    Labels y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<Label>(rng.uniform() * C);
    return y;
}

Index uniform_index(Rng& rng, Index lo, Index hi)
{
    return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

// 1. closed-form rows against the simplex QP oracle
Outcome closed_form_rows()
{
    const auto t0 = Clock::now();
    Rng rng(1001);
    const Index ks[] = {3, 5, 10};
    const double deltas[] = {0.0, 0.5, 0.8, 1.0};
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index k = ks[trial % 3];
        const double delta = deltas[(trial / 3) % 4];
        const Index n = uniform_index(rng, k + 2, 60);
        const Index n_s = uniform_index(rng, 2, n - 1);
        const int C = static_cast<int>(uniform_index(rng, 2, 4));
        const Labels ys = random_labels(rng, n_s, C);
        const Matrix Z = oracle::random_matrix(3, n, rng);
        const Matrix F = oracle::random_matrix(n, C, rng);
        const auto A = graph::affinity_cost(Z, F, 0.3, ys);
        const Index i = uniform_index(rng, 0, n - 1);
        const auto S = graph::learn_graph(A, k, delta, ys);

        Matrix expected = Matrix::Zero(1, n);
        auto fill = [&](const std::vector<Index>& cols, double mass) {
            if (cols.empty() || mass <= 0.0) return;
            std::vector<double> c;
            for (Index j : cols) c.push_back(A.values(i, j));
            const auto qp = baselines::simplex_qp_oracle(c, mass, static_cast<std::size_t>(k));
            for (std::size_t l = 0; l < cols.size(); ++l) expected(0, cols[l]) = qp.weights[l];
        };
        std::vector<Index> same;
        std::vector<Index> rest;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            if (i < n_s && j < n_s) {
                if (ys[j] == ys[i]) same.push_back(j);
            } else {
                rest.push_back(j);
            }
        }
        if (i < n_s) {
            const double src = same.empty() ? 0.0 : delta;
            fill(same, src);
            fill(rest, 1.0 - src);
        } else {
            fill(rest, 1.0);
        }
        Matrix got = Matrix::Zero(1, n);
        for (const auto& e : S.rows[i]) got(0, e.col) = e.weight;
        worst = std::max(worst, (got - expected).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    const std::string detail = "max deviation " + sci(worst) + ", " + fmt(secs, 2) + " s";
    if (worst > 1e-6) return fail(detail);
    if (secs >= 30.0) return fail(detail + " (over 30 s)");
    return {true, detail};
}

// 2. structural invariants after init and after every graph update
Outcome graph_invariants()
{
    Rng rng(1002);
    int checks = 0;
    for (int f = 0; f < 20; ++f) {
        Dataset ds = gen_synthetic_shift(2000 + f, uniform_index(rng, 4, 12), static_cast<int>(uniform_index(rng, 2, 4)),
                                         60.0 * rng.uniform(), {2.0 * rng.uniform(), rng.uniform()}, 5);
        standardize(ds);
        HyperParams p;
        p.k = uniform_index(rng, 2, 8);
        p.delta = std::vector<double>{0.0, 0.5, 0.8, 1.0}[f % 4];
        std::string bad;
        FitOptions opts;
        opts.observer = [&](Stage st, const FitState& s) {
            if (st != Stage::init && st != Stage::graph) return;
            ++checks;
            if (bad.empty()) bad = oracle::graph_violation(s.S, ds.source_labels, p.k, p.delta, true, 1e-9);
        };
        fit(ds, p, opts);
        if (!bad.empty()) return fail("fit " + std::to_string(f) + ": " + bad);
    }
    return {true, std::to_string(checks) + " graphs checked"};
}

// 3. harmonic propagation against fixed-point iteration
Outcome harmonic_propagation()
{
    Rng rng(1003);
    double dev = 0.0;
    double sum_err = 0.0;
    double range_err = 0.0;
    for (int g = 0; g < 50; ++g) {
        const Index n = uniform_index(rng, 4, 40);
        const Index n_c = uniform_index(rng, 1, n - 1);
        const int C = static_cast<int>(uniform_index(rng, 2, 4));
        Matrix W = Matrix::Zero(n, n);
        for (Index i = 1; i < n; ++i) {
            const Index j = uniform_index(rng, 0, i - 1);
            W(i, j) = W(j, i) = 0.1 + rng.uniform();
        }
        for (Index e = 0; e < n; ++e) {
            const Index i = uniform_index(rng, 0, n - 1);
            const Index j = uniform_index(rng, 0, n - 1);
            if (i != j) W(i, j) = W(j, i) = 0.1 + rng.uniform();
        }
        const Matrix Fc = one_hot(random_labels(rng, n_c, C), C);
        const Matrix F = propagation::harmonic_solve(laplacian_of(W), Fc, n_c);
        dev = std::max(dev, (F - oracle::propagate_fixed_point(W, Fc, n_c)).cwiseAbs().maxCoeff());
        sum_err = std::max(sum_err, (F.rowwise().sum().array() - 1.0).abs().maxCoeff());
        range_err = std::max({range_err, -F.minCoeff(), F.maxCoeff() - 1.0});
    }
    const std::string detail = "max deviation " + sci(dev) + ", row-sum error " + sci(sum_err);
    if (dev > 1e-8 || sum_err > 1e-8 || range_err > 1e-8) return fail(detail);
    return {true, detail};
}

// 4. MMD trace identities
Outcome mmd_identities()
{
    Rng rng(1004);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const Index n_s = uniform_index(rng, 2, 30);
        const Index n_t = uniform_index(rng, 2, 30);
        const int C = static_cast<int>(uniform_index(rng, 2, 5));
        const Index m = uniform_index(rng, 2, 8);
        const Matrix X = oracle::random_matrix(m, n_s + n_t, rng);
        const Matrix P = oracle::random_matrix(m, uniform_index(rng, 1, m), rng);
        const Matrix Z = P.transpose() * X;
        const Labels ys = random_labels(rng, n_s, C);
        const Labels yt = random_labels(rng, n_t, C);
        const Matrix M0 = mmd::marginal_mmd(n_s, n_t);
        const Matrix Mc = mmd::conditional_mmd(ys, yt, C);
        const double a = (Z * M0 * Z.transpose()).trace();
        const double a_ref = oracle::mean_gap(Z, n_s);
        const double b = (Z * Mc * Z.transpose()).trace();
        const double b_ref = oracle::class_mean_gap(Z, ys, yt, C);
        worst = std::max(worst, std::abs(a - a_ref) / std::max(std::abs(a_ref), 1e-300));
        worst = std::max(worst, std::abs(b - b_ref) / std::max(std::abs(b_ref), 1e-300));
    }
    const std::string detail = "max relative error " + sci(worst);
    if (worst > 1e-10) return fail(detail);
    return {true, detail};
}

// 5. variance constraint after every projection step
Outcome eigen_constraint()
{
    Rng rng(1005);
    double worst = 0.0;
    for (int f = 0; f < 20; ++f) {
        Dataset ds = gen_synthetic_shift(5000 + f, 12, 3, 40.0 * rng.uniform(), {1.0, 1.0}, 6);
        standardize(ds);
        HyperParams p;
        p.alpha = 0.1 + 2.0 * rng.uniform();
        p.gamma = 0.01 + rng.uniform();
        p.beta = rng.uniform();
        p.d = uniform_index(rng, 1, 6);
        p.k = uniform_index(rng, 3, 10);
        p.ablation = static_cast<Ablation>(f % 4);
        FitOptions opts;
        opts.observer = [&](Stage st, const FitState& s) {
            if (st == Stage::projection) worst = std::max(worst, variance_residual(s.P, ds.features));
        };
        fit(ds, p, opts);
    }
    const std::string detail = "max residual " + sci(worst);
    if (worst > 1e-5) return fail(detail);
    return {true, detail};
}

// 6. each alternating update does not increase the objective at fixed M
Outcome per_step_descent()
{
    Rng rng(1006);
    double worst = -1.0;
    int steps = 0;
    for (int inst = 0; inst < 10; ++inst) {
        const Index per_class = uniform_index(rng, 4, 10);
        Dataset ds = gen_synthetic_shift(6000 + inst, per_class, 3, 50.0 * rng.uniform(), {1.5, 0.5}, 5);
        standardize(ds);
        HyperParams p;
        p.k = uniform_index(rng, 3, 8);
        p.delta = 0.5 + 0.5 * rng.uniform();
        Solver s(ds, p);
        s.initialize();
        auto record = [&](double before, double after) {
            worst = std::max(worst, (after - before) / std::max(std::abs(before), 1e-300));
            ++steps;
        };
        for (int it = 0; it < 5; ++it) {
            s.update_mmd();
            const Matrix P_old = s.state().P;
            s.update_projection();
            const auto& st = s.state();
            if (P_old.size() != 0) record(s.objective_at(P_old, st.S, st.F, st.S.blocks), s.evaluate_objective());
            const auto S_new = s.propose_graph();
            const double before = s.objective_at(st.P, st.S, st.F, S_new.blocks);
            s.update_graph();
            record(before, s.objective_at(st.P, st.S, st.F, S_new.blocks));
            const double f_before = s.evaluate_objective();
            s.update_labels();
            record(f_before, s.evaluate_objective());
        }
    }
    const std::string detail = std::to_string(steps) + " steps, max relative increase " + sci(worst);
    if (worst > 1e-8) return fail(detail);
    return {true, detail};
}

struct Benchmark
{
    double nn = 0.0;
    double full = 0.0;
    double ds = 0.0;
    double dg = 0.0;
    double sp = 0.0;
    int converged = 0;
    double seconds = 0.0;
};

const Benchmark& benchmark()
{
    static const Benchmark b = [] {
        Benchmark r;
        const auto t0 = Clock::now();
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Dataset ds = gen_synthetic_shift(seed, 150, 3, 35.0, {2.0, 1.0}, 10);
            standardize(ds);
            const Labels truth = *ds.unlabeled_truth();
            r.nn += accuracy(baselines::nearest_neighbor(ds.features.leftCols(ds.n_s), ds.source_labels,
                                                         ds.features.rightCols(ds.n_u)),
                             truth);
            HyperParams p;
            const auto full = fit(ds, p);
            r.full += *full.accuracy;
            r.converged += full.converged ? 1 : 0;
            r.seconds = seconds_since(t0);
            for (auto [ab, slot] : {std::pair{Ablation::ds, &r.ds}, {Ablation::dg, &r.dg}, {Ablation::sp, &r.sp}}) {
                p.ablation = ab;
                *slot += *fit(ds, p).accuracy;
            }
        }
        for (double* v : {&r.nn, &r.full, &r.ds, &r.dg, &r.sp}) *v *= 100.0 / 5.0;
        return r;
    }();
    return b;
}

// Gap of the defaults over 1-NN measured on the first run of this benchmark, in points.
constexpr double pinned_gap = 22.9;

// 7. end-to-end synthetic adaptation
Outcome synthetic_adaptation()
{
    const auto& b = benchmark();
    const double gap = b.full - b.nn;
    const std::string detail = "full " + fmt(b.full, 2) + " vs 1-NN " + fmt(b.nn, 2) + ", gap " + fmt(gap, 2)
                               + " (pinned " + fmt(pinned_gap, 1) + " +/- 3), " + fmt(b.seconds, 1) + " s";
    if (gap < 10.0 || std::abs(gap - pinned_gap) > 3.0 || b.seconds >= 120.0) return fail(detail);
    return {true, detail};
}

// 8. ablation ordering
Outcome ablation_ordering()
{
    const auto& b = benchmark();
    const std::string detail = "full " + fmt(b.full, 2) + ", ds " + fmt(b.ds, 2) + ", dg " + fmt(b.dg, 2) + ", sp "
                               + fmt(b.sp, 2);
    const double tie = 1.0;
    if (b.full + tie < b.ds || b.ds + tie < b.dg || b.full + tie < b.sp) return fail(detail);
    return {true, detail};
}

// 9. labeled target samples do not hurt
Outcome sda_gain()
{
    double sda_total = 0.0;
    double uda_total = 0.0;
    const Index labeled_per_class = 3;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Dataset ds = gen_synthetic_shift(seed, 150, 3, 35.0, {2.0, 1.0}, 10);
        standardize(ds);
        const Labels truth = *ds.unlabeled_truth();

        HyperParams p;
        const auto uda = fit(ds, p);
        std::vector<Index> taken(3, 0);
        Labels uda_rest;
        Labels truth_rest;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (taken[truth[t]] < labeled_per_class) {
                ++taken[truth[t]];
                continue;
            }
            uda_rest.push_back(uda.pseudo_labels[t]);
            truth_rest.push_back(truth[t]);
        }
        uda_total += accuracy(uda_rest, truth_rest);

        const Dataset semi = with_labeled_target(ds, labeled_per_class);
        p.mode = Mode::sda;
        sda_total += *fit(semi, p).accuracy;
    }
    const double sda = 100.0 * sda_total / 5.0;
    const double uda = 100.0 * uda_total / 5.0;
    const std::string detail = "sda " + fmt(sda, 2) + " vs uda " + fmt(uda, 2) + " on the same unlabeled samples";
    if (sda < uda - 1.0) return fail(detail);
    return {true, detail};
}

// 10. convergence within T iterations
Outcome convergence()
{
    const auto& b = benchmark();
    const std::string detail = std::to_string(b.converged) + " of 5 runs converged";
    if (b.converged < 4) return fail(detail);
    return {true, detail};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"closed-form graph rows match the QP oracle", closed_form_rows},
        {"graph structural invariants", graph_invariants},
        {"harmonic propagation matches fixed-point iteration", harmonic_propagation},
        {"MMD trace identities", mmd_identities},
        {"variance constraint after each projection step", eigen_constraint},
        {"per-step objective descent", per_step_descent},
        {"synthetic adaptation beats 1-NN", synthetic_adaptation},
        {"ablation ordering", ablation_ordering},
        {"labeled target samples do not hurt", sda_gain},
        {"convergence within T iterations", convergence},
    };
    int failures = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        failures += o.pass ? 0 : 1;
        std::cout << "criterion " << (c + 1) << ": " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[c].first
                  << "  [" << o.detail << "]" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
