#pragma once

#include <cdgs/errors.hpp>
#include <cdgs/linalg.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cdgs {

using Label = int;
using Labels = std::vector<Label>;

/*
 * Samples are stored column-wise in the fixed order
 *   [ source (n_s) | labeled target (n_l) | unlabeled target (n_u) ].
 * Every index formula downstream relies on this ordering.
 */
struct Dataset
{
    Matrix features;                    // m x n
    Index n_s = 0;
    Index n_l = 0;
    Index n_u = 0;
    Labels source_labels;               // n_s
    Labels labeled_target_labels;       // n_l
    int num_classes = 0;
    std::optional<Labels> hidden_target_labels;  // n_l + n_u, evaluation only

    Index n() const { return n_s + n_l + n_u; }
    Index n_t() const { return n_l + n_u; }
    Index dim() const { return features.rows(); }

    /// Labels of every clamped sample: source followed by labeled target.
    Labels clamped_labels() const
    {
        Labels out = source_labels;
        out.insert(out.end(), labeled_target_labels.begin(), labeled_target_labels.end());
        return out;
    }

    /// Ground truth of the unlabeled target block, when available.
    std::optional<Labels> unlabeled_truth() const
    {
        if (!hidden_target_labels) return std::nullopt;
        return Labels(hidden_target_labels->begin() + n_l, hidden_target_labels->end());
    }

    void validate() const
    {
        if (features.rows() < 1 || features.cols() < 1) {
            throw ShapeError("feature matrix must have positive dimensions");
        }
        if (n_s < 0 || n_l < 0 || n_u < 0 || n() != features.cols()) {
            throw ShapeError("split (" + std::to_string(n_s) + "," + std::to_string(n_l) + ","
                             + std::to_string(n_u) + ") does not match "
                             + std::to_string(features.cols()) + " samples");
        }
        if (!features.allFinite()) throw ParseError("features contain non-finite values");
        if (num_classes < 1) throw LabelError("class count must be positive");
        if (static_cast<Index>(source_labels.size()) != n_s
            || static_cast<Index>(labeled_target_labels.size()) != n_l) {
            throw ShapeError("label counts do not match the split");
        }
        if (n_s < num_classes) {
            throw LabelError("need at least one source sample per class");
        }
        std::vector<Index> counts(num_classes, 0);
        auto check = [&](const Labels& ls, bool count) {
            for (Label y : ls) {
                if (y < 0 || y >= num_classes) {
                    throw LabelError("label " + std::to_string(y) + " outside [0,"
                                     + std::to_string(num_classes) + ")");
                }
                if (count) ++counts[y];
            }
        };
        check(source_labels, true);
        check(labeled_target_labels, false);
        for (int c = 0; c < num_classes; ++c) {
            if (counts[c] == 0) throw LabelError("source class " + std::to_string(c) + " is empty");
        }
        if (hidden_target_labels) {
            if (static_cast<Index>(hidden_target_labels->size()) != n_t()) {
                throw ShapeError("hidden target labels must cover every target sample");
            }
            check(*hidden_target_labels, false);
        }
    }
};

enum class Mode { uda, sda };
enum class Ablation { full, sp, dg, ds };

inline std::string to_string(Mode m) { return m == Mode::uda ? "uda" : "sda"; }

inline std::string to_string(Ablation a)
{
    switch (a) {
    case Ablation::full: return "full";
    case Ablation::sp: return "sp";
    case Ablation::dg: return "dg";
    case Ablation::ds: return "ds";
    }
    return "full";
}

inline Ablation parse_ablation(std::string_view s)
{
    if (s == "full") return Ablation::full;
    if (s == "sp") return Ablation::sp;
    if (s == "dg") return Ablation::dg;
    if (s == "ds") return Ablation::ds;
    throw ConfigError("unknown ablation '" + std::string(s) + "' (expected full, sp, dg or ds)");
}

inline Mode parse_mode(std::string_view s)
{
    if (s == "uda") return Mode::uda;
    if (s == "sda") return Mode::sda;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected uda or sda)");
}

struct HyperParams
{
    double alpha = 1.0;
    double beta = 0.1;
    double gamma = 0.1;
    Index d = 0;             // 0 selects min(2C, m)
    Index k = 20;
    double delta = 0.8;
    int T = 10;
    Mode mode = Mode::uda;
    Ablation ablation = Ablation::full;

    Index subspace_dim(const Dataset& ds) const
    {
        return d > 0 ? d : std::min<Index>(2 * ds.num_classes, ds.dim());
    }

    /// Checks the parameter invariants against a dataset. Throws ConfigError.
    void validate(const Dataset& ds) const
    {
        const Index m = ds.dim();
        const Index n = ds.n();
        const Index dd = subspace_dim(ds);
        if (dd < 1 || dd > std::min(m, n)) {
            throw ConfigError("subspace dimension d = " + std::to_string(dd)
                              + " violates 1 <= d <= min(m, n) = " + std::to_string(std::min(m, n)));
        }
        if (k < 1 || k > n - 1) {
            throw ConfigError("neighbor count k = " + std::to_string(k)
                              + " violates 1 <= k <= n - 1 = " + std::to_string(n - 1));
        }
        if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
        if (T < 1) throw ConfigError("T must be at least 1");
        if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
        if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
        if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
        if (ds.n_t() < 1) throw ConfigError("dataset has no target samples");
        if (mode == Mode::sda && ds.n_l == 0) {
            throw ConfigError("sda mode requires labeled target samples (n_labeled > 0)");
        }
        if (mode == Mode::uda && ds.n_l != 0) {
            throw ConfigError("uda mode requires n_labeled = 0; use mode = sda");
        }
        if (mode == Mode::sda && ds.n_u == 0) {
            throw ConfigError("sda mode requires at least one unlabeled target sample");
        }
    }
};

/*
 * Portable generator: std::mt19937_64 (its output sequence is fixed by the
 * standard), 53-bit uniforms from the top bits, Box-Muller normals. Distribution
 * objects from <random> are avoided because their algorithms are unspecified.
 */
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Matrix one_hot(const Labels& labels, int num_classes)
{
    Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw LabelError("label " + std::to_string(labels[i]) + " outside [0,"
                             + std::to_string(num_classes) + ")");
        }
        out(static_cast<Index>(i), labels[i]) = 1.0;
    }
    return out;
}

inline double accuracy(const Labels& pred, const Labels& truth)
{
    if (pred.empty() || pred.size() != truth.size()) {
        throw ShapeError("accuracy needs equal-length non-empty label vectors (got "
                         + std::to_string(pred.size()) + " and " + std::to_string(truth.size()) + ")");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == truth[i]);
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Z-scores every feature row using statistics of all samples. Constant rows are only centered.
inline void standardize(Dataset& ds)
{
    Matrix& X = ds.features;
    const double n = static_cast<double>(X.cols());
    for (Index r = 0; r < X.rows(); ++r) {
        const double mean = X.row(r).mean();
        X.row(r).array() -= mean;
        const double sd = std::sqrt(X.row(r).squaredNorm() / n);
        if (sd > 0.0) X.row(r) /= sd;
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace io {

inline constexpr std::array<char, 8> binary_magic{'C', 'D', 'G', 'S', 'M', 'A', 'T', '1'};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_real(std::string_view tok, const std::string& where)
{
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (tok.empty() || ec != std::errc() || ptr != last) {
        throw ParseError("malformed real '" + std::string(tok) + "' at " + where);
    }
    if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "' at " + where);
    return v;
}

inline long long parse_int(std::string_view tok, const std::string& where)
{
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("malformed integer '" + std::string(tok) + "' at " + where);
    }
    return v;
}

inline std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in)
{
    std::ifstream in(path, mode);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    return in;
}

/// Opens a file for writing, creating missing parent directories.
inline std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, mode);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    return out;
}

inline void put_u64(std::ostream& out, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in)
{
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError("truncated binary matrix");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace detail

/// Writes "CDGSMAT1", rows, cols (u64 LE) and row-major f64 LE entries.
inline void write_binary_matrix(const std::filesystem::path& path, const Matrix& A)
{
    auto out = detail::open_out(path, std::ios::binary);
    out.write(binary_magic.data(), binary_magic.size());
    detail::put_u64(out, static_cast<std::uint64_t>(A.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(A.cols()));
    for (Index r = 0; r < A.rows(); ++r) {
        for (Index c = 0; c < A.cols(); ++c) {
            detail::put_u64(out, std::bit_cast<std::uint64_t>(A(r, c)));
        }
    }
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

inline bool has_binary_magic(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::array<char, 8> head{};
    return in.read(head.data(), head.size()) && head == binary_magic;
}

inline Matrix read_binary_matrix(const std::filesystem::path& path)
{
    auto in = detail::open_in(path, std::ios::binary);
    std::array<char, 8> head{};
    if (!in.read(head.data(), head.size()) || head != binary_magic) {
        throw ParseError("'" + path.string() + "' lacks the CDGSMAT1 header");
    }
    const auto rows = detail::get_u64(in);
    const auto cols = detail::get_u64(in);
    if (rows == 0 || cols == 0 || rows > (1ull << 32) || cols > (1ull << 32)) {
        throw ParseError("invalid binary matrix dimensions");
    }
    Matrix A(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index r = 0; r < A.rows(); ++r) {
        for (Index c = 0; c < A.cols(); ++c) {
            A(r, c) = std::bit_cast<double>(detail::get_u64(in));
        }
    }
    if (!A.allFinite()) throw ParseError("binary matrix contains non-finite values");
    return A;
}

/// Features CSV: header f0..f{m-1}, one sample per line. Returns m x n.
inline Matrix read_features_csv(const std::filesystem::path& path)
{
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path.string() + "' is empty");
    const auto header = detail::split(line, ',');
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] != "f" + std::to_string(j)) {
            throw ParseError("features header must read f0,...,f{m-1}; found '" + std::string(header[j]) + "'");
        }
    }
    const std::size_t m = header.size();
    std::vector<double> values;
    std::size_t n = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto toks = detail::split(line, ',');
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (toks.size() != m) {
            throw ParseError("expected " + std::to_string(m) + " fields at " + where);
        }
        for (auto t : toks) values.push_back(detail::parse_real(t, where));
        ++n;
    }
    if (n == 0) throw ParseError("'" + path.string() + "' has no samples");
    Matrix X(static_cast<Index>(m), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) X(static_cast<Index>(j), static_cast<Index>(i)) = values[i * m + j];
    }
    return X;
}

inline void write_features_csv(const std::filesystem::path& path, const Matrix& X)
{
    auto out = detail::open_out(path);
    for (Index j = 0; j < X.rows(); ++j) out << (j ? "," : "") << 'f' << j;
    out << '\n' << std::setprecision(17);
    for (Index i = 0; i < X.cols(); ++i) {
        for (Index j = 0; j < X.rows(); ++j) out << (j ? "," : "") << X(j, i);
        out << '\n';
    }
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

/// Labels CSV: header "label", one non-negative integer per line.
inline Labels read_labels_csv(const std::filesystem::path& path)
{
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "label") {
        throw ParseError("'" + path.string() + "' must start with the header 'label'");
    }
    Labels out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = detail::trim(line);
        if (tok.empty()) continue;
        const auto v = detail::parse_int(tok, path.string() + ":" + std::to_string(lineno));
        if (v < 0 || v > std::numeric_limits<int>::max()) {
            throw LabelError("label out of range at " + path.string() + ":" + std::to_string(lineno));
        }
        out.push_back(static_cast<Label>(v));
    }
    return out;
}

inline void write_labels_csv(const std::filesystem::path& path, const Labels& labels)
{
    auto out = detail::open_out(path);
    out << "label\n";
    for (Label y : labels) out << y << '\n';
    if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

} // namespace io

struct Split
{
    Index n_s = 0;
    Index n_l = 0;
    Index n_u = 0;
};

/*
 * Reads features (CSV or CDGSMAT1 binary with one sample per row) and the
 * labels CSV. The labels file lists either the labeled prefix (n_s + n_l rows)
 * or every sample; rows past the prefix become hidden evaluation labels.
 * The class count is inferred from the largest label unless given.
 */
inline Dataset load_dataset(const std::filesystem::path& features_path,
                            const std::filesystem::path& labels_path,
                            const Split& split,
                            std::optional<int> num_classes = std::nullopt)
{
    if (!std::filesystem::exists(features_path)) {
        throw ParseError("features file '" + features_path.string() + "' does not exist");
    }
    Dataset ds;
    ds.features = io::has_binary_magic(features_path)
        ? Matrix(io::read_binary_matrix(features_path).transpose())
        : io::read_features_csv(features_path);
    const Labels labels = io::read_labels_csv(labels_path);

    ds.n_s = split.n_s;
    ds.n_l = split.n_l;
    ds.n_u = split.n_u;
    const Index n = ds.features.cols();
    const Index prefix = split.n_s + split.n_l;
    if (split.n_s < 0 || split.n_l < 0 || split.n_u < 0 || ds.n() != n) {
        throw ShapeError("split sums to " + std::to_string(ds.n()) + " but the features file has "
                         + std::to_string(n) + " samples");
    }
    const auto nlab = static_cast<Index>(labels.size());
    if (nlab != prefix && nlab != n) {
        throw ShapeError("labels file has " + std::to_string(nlab) + " rows; expected "
                         + std::to_string(prefix) + " (labeled prefix) or " + std::to_string(n));
    }
    ds.source_labels.assign(labels.begin(), labels.begin() + split.n_s);
    ds.labeled_target_labels.assign(labels.begin() + split.n_s, labels.begin() + prefix);
    if (nlab == n) {
        ds.hidden_target_labels = Labels(labels.begin() + split.n_s, labels.end());
    }
    int max_label = -1;
    for (Label y : labels) max_label = std::max(max_label, y);
    ds.num_classes = num_classes.value_or(max_label + 1);
    ds.validate();
    return ds;
}

/// Writes features and the full label vector (labeled prefix then hidden truth, when present).
inline void save_dataset(const Dataset& ds,
                         const std::filesystem::path& features_path,
                         const std::filesystem::path& labels_path,
                         bool binary = false)
{
    if (binary) {
        io::write_binary_matrix(features_path, ds.features.transpose());
    } else {
        io::write_features_csv(features_path, ds.features);
    }
    Labels labels = ds.clamped_labels();
    if (ds.hidden_target_labels) {
        labels.insert(labels.end(), ds.hidden_target_labels->begin() + ds.n_l,
                      ds.hidden_target_labels->end());
    }
    io::write_labels_csv(labels_path, labels);
}

// ---------------------------------------------------------------------------
// Synthetic covariate shift
// ---------------------------------------------------------------------------

// Standard deviation of the coordinates beyond the first two.
inline constexpr double synthetic_noise_sd = 0.1;
inline constexpr double synthetic_radius = 4.0;

/*
 * Source: C unit-covariance blobs with means on a circle of radius 4 in the
 * first two coordinates; remaining coordinates are N(0, 0.1^2). Sample i of a
 * domain has class i mod C. Target: a fresh draw from the same blobs, rotated
 * by rotation_deg in the first two coordinates and then translated by shift
 * (zero-padded to dim).
 */
inline Dataset gen_synthetic_shift(std::uint64_t seed, Index per_class, int num_classes,
                                   double rotation_deg, const std::vector<double>& shift, Index dim)
{
    if (per_class < 2) throw ArgumentError("per_class must be at least 2");
    if (num_classes < 2) throw ArgumentError("class count must be at least 2");
    if (dim < 2) throw ArgumentError("dim must be at least 2");
    if (static_cast<Index>(shift.size()) > dim) throw ArgumentError("shift has more entries than dim");
    for (double s : shift) {
        if (!std::isfinite(s)) throw ArgumentError("shift must be finite");
    }
    if (!std::isfinite(rotation_deg)) throw ArgumentError("rotation must be finite");

    Rng rng(seed);
    const Index per_domain = per_class * num_classes;
    Dataset ds;
    ds.num_classes = num_classes;
    ds.n_s = per_domain;
    ds.n_u = per_domain;
    ds.features.resize(dim, 2 * per_domain);
    ds.source_labels.resize(per_domain);
    Labels target(per_domain);

    const double theta = rotation_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (Index i = 0; i < 2 * per_domain; ++i) {
        const bool is_target = i >= per_domain;
        const Index local = is_target ? i - per_domain : i;
        const int c = static_cast<int>(local % num_classes);
        const double angle = 2.0 * std::numbers::pi * c / num_classes;
        auto x = ds.features.col(i);
        x(0) = synthetic_radius * std::cos(angle) + rng.normal();
        x(1) = synthetic_radius * std::sin(angle) + rng.normal();
        for (Index r = 2; r < dim; ++r) x(r) = synthetic_noise_sd * rng.normal();
        if (is_target) {
            const double a = x(0);
            const double b = x(1);
            x(0) = ct * a - st * b;
            x(1) = st * a + ct * b;
            for (std::size_t r = 0; r < shift.size(); ++r) x(static_cast<Index>(r)) += shift[r];
            target[local] = c;
        } else {
            ds.source_labels[local] = c;
        }
    }
    ds.hidden_target_labels = std::move(target);
    return ds;
}

/*
 * Moves the first `per_class` target samples of every class (in sample order)
 * to the labeled-target block. Requires hidden target labels.
 */
inline Dataset with_labeled_target(const Dataset& ds, Index per_class)
{
    if (!ds.hidden_target_labels) throw ArgumentError("labeling target samples needs hidden truth");
    if (ds.n_l != 0) throw ArgumentError("dataset already has labeled target samples");
    if (per_class < 0) throw ArgumentError("per_class must be non-negative");
    const Labels& truth = *ds.hidden_target_labels;
    std::vector<Index> taken(ds.num_classes, 0);
    std::vector<Index> labeled;
    std::vector<Index> unlabeled;
    for (Index t = 0; t < ds.n_t(); ++t) {
        const Label y = truth[t];
        if (taken[y] < per_class) {
            ++taken[y];
            labeled.push_back(t);
        } else {
            unlabeled.push_back(t);
        }
    }
    Dataset out;
    out.num_classes = ds.num_classes;
    out.n_s = ds.n_s;
    out.n_l = static_cast<Index>(labeled.size());
    out.n_u = static_cast<Index>(unlabeled.size());
    out.source_labels = ds.source_labels;
    out.features.resize(ds.dim(), ds.n());
    out.features.leftCols(ds.n_s) = ds.features.leftCols(ds.n_s);
    Labels hidden;
    Index col = ds.n_s;
    for (const auto* block : {&labeled, &unlabeled}) {
        for (Index t : *block) {
            out.features.col(col++) = ds.features.col(ds.n_s + t);
            hidden.push_back(truth[t]);
        }
    }
    out.labeled_target_labels.assign(hidden.begin(), hidden.begin() + out.n_l);
    out.hidden_target_labels = std::move(hidden);
    out.validate();
    return out;
}

} // namespace cdgs
