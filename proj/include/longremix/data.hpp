#pragma once

// Datasets with hidden true labels, CSV ingestion and synthetic label noise.

#include <Eigen/Dense>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "longremix/error.hpp"
#include "longremix/rng.hpp"

namespace longremix {

/// Features with observed labels, the hidden true labels they came from and
/// the resulting noise mask (true iff observed != true).
struct NoisyDataset {
    Eigen::MatrixXd features;  // n x d
    std::vector<int> labels;
    std::vector<int> true_labels;
    std::vector<bool> noise_mask;
    int num_classes = 0;
    std::vector<std::string> class_names;  // index -> token
    bool noise_injected = false;

    std::size_t size() const { return labels.size(); }
    Eigen::Index dim() const { return features.cols(); }
    std::size_t noisy_count() const {
        std::size_t n = 0;
        for (bool b : noise_mask) n += b;
        return n;
    }
};

inline void check_consistent(const NoisyDataset& ds) {
    const auto n = ds.labels.size();
    if (static_cast<std::size_t>(ds.features.rows()) != n || ds.true_labels.size() != n || ds.noise_mask.size() != n)
        throw ShapeError("dataset columns have inconsistent lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes || ds.true_labels[i] < 0 ||
            ds.true_labels[i] >= ds.num_classes)
            throw ShapeError("label index out of range at sample " + std::to_string(i));
        if (ds.noise_mask[i] != (ds.labels[i] != ds.true_labels[i]))
            throw StateError("noise mask disagrees with labels at sample " + std::to_string(i));
    }
}

enum class SyntheticKind { blobs, moons };

inline std::string to_string(SyntheticKind k) { return k == SyntheticKind::blobs ? "blobs" : "moons"; }

/// Balanced synthetic classification data. Sample i belongs to class
/// i % classes. Blob centres sit evenly on a circle with adjacent centres one
/// unit apart, so no centre lies on the segment between two others; `spread`
/// is the per-axis standard deviation.
/// Moons follows the usual two interleaved half circles with Gaussian jitter.
inline NoisyDataset make_synthetic_dataset(SyntheticKind kind, std::size_t n, int classes, double spread,
                                           std::uint64_t seed) {
    if (classes < 1) throw ConfigError("synthetic dataset needs at least one class");
    if (n < static_cast<std::size_t>(classes)) throw ConfigError("synthetic dataset needs n >= classes");
    if (!(spread > 0.0)) throw ConfigError("synthetic dataset spread must be positive");
    if (kind == SyntheticKind::moons && classes != 2) throw ConfigError("moons dataset requires exactly 2 classes");

    Rng rng(seed);
    std::normal_distribution<double> jitter(0.0, spread);
    NoisyDataset ds;
    ds.num_classes = classes;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    ds.labels.resize(n);
    for (int c = 0; c < classes; ++c) ds.class_names.push_back(std::to_string(c));

    // adjacent centres one unit apart
    const double radius = classes > 1 ? 0.5 / std::sin(std::numbers::pi / classes) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        double x = 0.0, y = 0.0;
        if (kind == SyntheticKind::blobs) {
            const double angle = 2.0 * std::numbers::pi * c / classes;
            x = radius * std::cos(angle);
            y = radius * std::sin(angle);
        } else {
            const double t = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
            x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
            y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
        }
        ds.features(static_cast<Eigen::Index>(i), 0) = x + jitter(rng);
        ds.features(static_cast<Eigen::Index>(i), 1) = y + jitter(rng);
        ds.labels[i] = c;
    }
    ds.true_labels = ds.labels;
    ds.noise_mask.assign(n, false);
    return ds;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Parses a CSV with a header row: feature columns, then a final `label`
/// column. Label tokens are indexed in order of first appearance.
/// If `known_classes` is non-empty the token table is fixed to it and unknown
/// tokens are rejected.
inline NoisyDataset parse_csv_dataset(std::istream& in, const std::vector<std::string>& known_classes = {}) {
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](std::size_t row, const std::string& msg) -> ParseError {
        return ParseError("line " + std::to_string(line_no) + " (row " + std::to_string(row) + "): " + msg);
    };

    if (!std::getline(in, line)) throw ParseError("line 1: missing header row");
    ++line_no;
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_commas(line);
    if (header.size() < 2) throw ParseError("line 1: header needs at least one feature column and a label column");
    if (detail::trim(header.back()) != "label") throw ParseError("line 1: last header column must be 'label'");
    const std::size_t d = header.size() - 1;

    std::unordered_map<std::string, int> token_index;
    std::vector<std::string> names = known_classes;
    for (std::size_t c = 0; c < names.size(); ++c) token_index.emplace(names[c], static_cast<int>(c));
    const bool fixed_classes = !known_classes.empty();

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto fields = detail::split_commas(line);
        if (fields.size() != d + 1)
            throw fail(row, "expected " + std::to_string(d + 1) + " fields, found " + std::to_string(fields.size()));
        for (std::size_t j = 0; j < d; ++j) {
            const auto f = detail::trim(fields[j]);
            if (f.empty()) throw fail(row, "missing value in column " + std::to_string(j + 1));
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v))
                throw fail(row, "non-numeric feature '" + std::string(f) + "' in column " + std::to_string(j + 1));
            values.push_back(v);
        }
        const std::string token(detail::trim(fields[d]));
        if (token.empty()) throw fail(row, "missing label");
        auto it = token_index.find(token);
        if (it == token_index.end()) {
            if (fixed_classes) throw fail(row, "unknown label token '" + token + "'");
            it = token_index.emplace(token, static_cast<int>(names.size())).first;
            names.push_back(token);
        }
        labels.push_back(it->second);
    }
    if (labels.empty()) throw ParseError("no data rows");

    NoisyDataset ds;
    ds.features.resize(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];
    ds.labels = labels;
    ds.true_labels = labels;
    ds.noise_mask.assign(labels.size(), false);
    ds.num_classes = static_cast<int>(names.size());
    ds.class_names = std::move(names);
    return ds;
}

inline NoisyDataset load_csv_dataset(const std::string& path, const std::vector<std::string>& known_classes = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return parse_csv_dataset(in, known_classes);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

/// Writes features and observed labels in the same CSV layout the loader reads.
inline void write_csv_dataset(const NoisyDataset& ds, std::ostream& os) {
    for (Eigen::Index j = 0; j < ds.dim(); ++j) os << 'x' << j << ',';
    os << "label\n";
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.dim(); ++j) os << ds.features(static_cast<Eigen::Index>(i), j) << ',';
        const int label = ds.labels[i];
        os << (static_cast<std::size_t>(label) < ds.class_names.size() ? ds.class_names[label] : std::to_string(label))
           << '\n';
    }
}

enum class NoiseKind { symmetric, asymmetric };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::symmetric ? "symmetric" : "asymmetric"; }

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetric;
    double rate = 0.0;
    std::map<int, int> mapping;  // asymmetric only: source class -> target class
    std::uint64_t seed = 0;
};

namespace detail {

inline void require_fresh(const NoisyDataset& ds) {
    if (ds.noise_injected) throw StateError("label noise was already injected into this dataset");
}

}  // namespace detail

/// Each sample flips independently with probability eta; a flipped label is
/// drawn uniformly from the other |Y| - 1 classes.
inline NoisyDataset inject_symmetric_noise(NoisyDataset ds, double eta, std::uint64_t seed) {
    detail::require_fresh(ds);
    if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("symmetric noise rate must lie in [0, 1)");
    if (eta > 0.0 && ds.num_classes < 2) throw ConfigError("symmetric noise needs at least 2 classes");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int truth = ds.labels[i];
        ds.true_labels[i] = truth;
        if (u(rng) < eta) {
            const int r = std::uniform_int_distribution<int>(0, ds.num_classes - 2)(rng);
            ds.labels[i] = r >= truth ? r + 1 : r;
        }
        ds.noise_mask[i] = ds.labels[i] != ds.true_labels[i];
    }
    ds.noise_injected = true;
    return ds;
}

/// Samples of a mapped class flip to the mapped target with probability eta.
inline NoisyDataset inject_asymmetric_noise(NoisyDataset ds, double eta, const std::map<int, int>& mapping,
                                            std::uint64_t seed) {
    detail::require_fresh(ds);
    if (!(eta >= 0.0)) throw ConfigError("asymmetric noise rate must be non-negative");
    if (eta >= 0.5)
        throw ConfigError("asymmetric noise rate must be below 0.5 (at 0.5 a mapped class is as likely to carry "
                          "its target label as its own, the theoretical limit)");
    for (const auto& [src, dst] : mapping) {
        if (src < 0 || src >= ds.num_classes || dst < 0 || dst >= ds.num_classes)
            throw ConfigError("asymmetric mapping " + std::to_string(src) + "->" + std::to_string(dst) +
                              " references an unknown class");
        if (src == dst) throw ConfigError("asymmetric mapping must not map a class to itself");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const int truth = ds.labels[i];
        ds.true_labels[i] = truth;
        const auto it = mapping.find(truth);
        if (it != mapping.end() && u(rng) < eta) ds.labels[i] = it->second;
        ds.noise_mask[i] = ds.labels[i] != ds.true_labels[i];
    }
    ds.noise_injected = true;
    return ds;
}

inline NoisyDataset inject_noise(NoisyDataset ds, const NoiseSpec& spec) {
    if (spec.kind == NoiseKind::symmetric) return inject_symmetric_noise(std::move(ds), spec.rate, spec.seed);
    return inject_asymmetric_noise(std::move(ds), spec.rate, spec.mapping, spec.seed);
}

/// Provenance record written next to noisy outputs.
inline nlohmann::ordered_json noise_sidecar(const NoiseSpec& spec, std::size_t flipped_count) {
    nlohmann::ordered_json mapping = nlohmann::ordered_json::object();
    for (const auto& [src, dst] : spec.mapping) mapping[std::to_string(src)] = dst;
    return {{"kind", to_string(spec.kind)},
            {"eta", spec.rate},
            {"mapping", mapping},
            {"seed", spec.seed},
            {"flipped_count", flipped_count}};
}

}  // namespace longremix
