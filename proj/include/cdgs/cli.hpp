#pragma once

#include <cdgs/data.hpp>
#include <cdgs/graph.hpp>
#include <cdgs/solver.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace cdgs::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_data = 3,
    exit_numerical = 4,
};

inline int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config: return exit_config;
    case ErrorKind::data: return exit_data;
    case ErrorKind::numerical: return exit_numerical;
    }
    return exit_numerical;
}

/*
 * Flat `key = value` configuration; `#` starts a comment. Keys are checked
 * against the set a command understands.
 */
class Config
{
public:
    static Config parse(std::istream& in, const std::string& origin = "config")
    {
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto body = io::detail::trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            }
            const std::string key(io::detail::trim(body.substr(0, eq)));
            const std::string value(io::detail::trim(body.substr(eq + 1)));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            if (c.values_.count(key)) throw ConfigError(origin + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    static Config load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
        return parse(in, path.string());
    }

    void restrict_to(const std::set<std::string>& allowed) const
    {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string str(const std::string& key) const
    {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
        return it->second;
    }

    std::string str(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? str(key) : fallback;
    }

    double real(const std::string& key, double fallback) const
    {
        return has(key) ? to_real(key, str(key)) : fallback;
    }

    long long integer(const std::string& key) const { return to_int(key, str(key)); }

    long long integer(const std::string& key, long long fallback) const
    {
        return has(key) ? to_int(key, str(key)) : fallback;
    }

    bool flag(const std::string& key, bool fallback) const
    {
        if (!has(key)) return fallback;
        const auto v = str(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
    }

    std::vector<double> reals(const std::string& key) const
    {
        std::vector<double> out;
        if (!has(key)) return out;
        for (auto tok : io::detail::split(str(key), ',')) {
            if (!tok.empty()) out.push_back(to_real(key, std::string(tok)));
        }
        return out;
    }

private:
    static double to_real(const std::string& key, const std::string& v)
    {
        try {
            return io::detail::parse_real(v, "key '" + key + "'");
        } catch (const ParseError&) {
            throw ConfigError("key '" + key + "' expects a finite real, got '" + v + "'");
        }
    }

    static long long to_int(const std::string& key, const std::string& v)
    {
        try {
            return io::detail::parse_int(v, "key '" + key + "'");
        } catch (const ParseError&) {
            throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

/// Resolves a path relative to the directory holding the config file.
inline std::filesystem::path resolve(const std::filesystem::path& config_path, const std::string& p)
{
    std::filesystem::path path(p);
    if (path.is_absolute()) return path;
    return config_path.parent_path() / path;
}

inline HyperParams read_params(const Config& c)
{
    HyperParams p;
    p.alpha = c.real("alpha", p.alpha);
    p.beta = c.real("beta", p.beta);
    p.gamma = c.real("gamma", p.gamma);
    p.d = c.integer("d", p.d);
    p.k = c.integer("k", p.k);
    p.delta = c.real("delta", p.delta);
    p.T = static_cast<int>(c.integer("T", p.T));
    p.mode = parse_mode(c.str("mode", "uda"));
    p.ablation = parse_ablation(c.str("ablation", "full"));
    if (c.has("d") && p.d < 1) throw ConfigError("d must be at least 1");
    return p;
}

template <class F>
int guarded(std::ostream& err, F&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_numerical;
    }
}

inline std::string format_fixed(double v, int digits)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

/*
 * fit: keys features, labels, n_source, n_labeled, n_unlabeled, report,
 * predictions (required apart from n_labeled); classes, standardize, alpha,
 * beta, gamma, d, k, delta, T, mode, ablation, seed, log, graph_out.
 */
inline int cmd_fit(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto c = Config::load(config_path);
        c.restrict_to({"features", "labels", "n_source", "n_labeled", "n_unlabeled", "classes", "standardize",
                       "alpha", "beta", "gamma", "d", "k", "delta", "T", "mode", "ablation", "seed", "report",
                       "predictions", "log", "graph_out"});
        const HyperParams params = read_params(c);
        const Split split{c.integer("n_source"), c.integer("n_labeled", 0), c.integer("n_unlabeled")};
        const auto report_path = resolve(config_path, c.str("report"));
        const auto pred_path = resolve(config_path, c.str("predictions"));
        const auto seed = c.integer("seed", 0);
        std::optional<int> classes;
        if (c.has("classes")) classes = static_cast<int>(c.integer("classes"));
        const bool zscore = c.flag("standardize", true);
        const auto log_path = c.has("log") ? std::optional(resolve(config_path, c.str("log"))) : std::nullopt;
        const auto graph_path =
            c.has("graph_out") ? std::optional(resolve(config_path, c.str("graph_out"))) : std::nullopt;

        Dataset data = load_dataset(resolve(config_path, c.str("features")),
                                    resolve(config_path, c.str("labels")), split, classes);
        if (zscore) standardize(data);

        std::ofstream log_file;
        FitOptions opts;
        opts.warn = &err;
        if (log_path) {
            log_file = io::detail::open_out(*log_path);
            opts.log = &log_file;
        }
        Solver solver(data, params, opts);
        const FitReport r = solver.run();

        io::write_labels_csv(pred_path, r.pseudo_labels);
        if (graph_path) {
            auto g = io::detail::open_out(*graph_path);
            graph::export_edges(g, solver.state().S);
        }
        auto rep = io::detail::open_out(report_path);
        rep << std::setprecision(12);
        if (r.accuracy) rep << "accuracy = " << format_fixed(*r.accuracy, 6) << '\n';
        rep << "iterations = " << r.iterations_run << '\n'
            << "converged = " << (r.converged ? "true" : "false") << '\n'
            << "objective_final = " << (r.objective_trace.empty() ? 0.0 : r.objective_trace.back()) << '\n'
            << "mode = " << to_string(params.mode) << '\n'
            << "ablation = " << to_string(params.ablation) << '\n'
            << "n_source = " << data.n_s << '\n'
            << "n_labeled = " << data.n_l << '\n'
            << "n_unlabeled = " << data.n_u << '\n'
            << "d = " << params.subspace_dim(data) << '\n'
            << "isolated_nodes = " << r.isolated_nodes << '\n'
            << "seed = " << seed << '\n';
        if (!rep) throw ParseError("failed writing report '" + report_path.string() + "'");
        out << "accuracy: " << (r.accuracy ? format_fixed(*r.accuracy, 4) : std::string("n/a"))
            << "  iterations: " << r.iterations_run << "  converged: " << (r.converged ? "true" : "false") << '\n';
        return static_cast<int>(exit_ok);
    });
}

/*
 * synth: keys seed, per_class, classes, rotation_deg, shift, dim,
 * labeled_per_class, features, labels, truth, binary, fit_config.
 */
inline int cmd_synth(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto c = Config::load(config_path);
        c.restrict_to({"seed", "per_class", "classes", "rotation_deg", "shift", "dim", "labeled_per_class",
                       "features", "labels", "truth", "binary", "fit_config"});
        const auto seed = c.integer("seed", 0);
        if (seed < 0) throw ConfigError("seed must be non-negative");
        const auto per_class = c.integer("per_class", 150);
        const auto classes = c.integer("classes", 3);
        const auto dim = c.integer("dim", 10);
        const auto labeled = c.integer("labeled_per_class", 0);
        if (labeled < 0 || labeled >= per_class) {
            throw ConfigError("labeled_per_class must satisfy 0 <= labeled_per_class < per_class");
        }
        Dataset ds = gen_synthetic_shift(static_cast<std::uint64_t>(seed), per_class, static_cast<int>(classes),
                                         c.real("rotation_deg", 35.0), c.has("shift") ? c.reals("shift")
                                                                                      : std::vector<double>{2.0, 1.0},
                                         dim);
        if (labeled > 0) ds = with_labeled_target(ds, labeled);
        const auto features = resolve(config_path, c.str("features"));
        const auto labels = resolve(config_path, c.str("labels"));
        save_dataset(ds, features, labels, c.flag("binary", false));
        if (c.has("truth")) io::write_labels_csv(resolve(config_path, c.str("truth")), *ds.unlabeled_truth());
        if (c.has("fit_config")) {
            const auto fc = resolve(config_path, c.str("fit_config"));
            auto f = io::detail::open_out(fc);
            const auto rel = [&](const std::filesystem::path& p) {
                return std::filesystem::absolute(p).lexically_normal().string();
            };
            f << "features = " << rel(features) << '\n'
              << "labels = " << rel(labels) << '\n'
              << "classes = " << classes << '\n'
              << "n_source = " << ds.n_s << '\n'
              << "n_labeled = " << ds.n_l << '\n'
              << "n_unlabeled = " << ds.n_u << '\n'
              << "mode = " << (ds.n_l > 0 ? "sda" : "uda") << '\n'
              << "seed = " << seed << '\n'
              << "report = " << rel(fc.parent_path() / "report.txt") << '\n'
              << "predictions = " << rel(fc.parent_path() / "predictions.csv") << '\n';
        }
        out << "n_source = " << ds.n_s << "\nn_labeled = " << ds.n_l << "\nn_unlabeled = " << ds.n_u << '\n';
        return static_cast<int>(exit_ok);
    });
}

/// eval: prints the accuracy of a predictions file against a truth file with 4 decimals.
inline int cmd_eval(const std::filesystem::path& pred_path, const std::filesystem::path& truth_path,
                    std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const Labels pred = io::read_labels_csv(pred_path);
        const Labels truth = io::read_labels_csv(truth_path);
        out << format_fixed(accuracy(pred, truth), 4) << '\n';
        return static_cast<int>(exit_ok);
    });
}

} // namespace cdgs::cli
