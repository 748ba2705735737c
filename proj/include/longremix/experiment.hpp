#pragma once

// Experiment configuration (flat dotted key = value text), the end-to-end
// driver, precision/recall curves over a threshold grid and report emission.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "longremix/data.hpp"
#include "longremix/lemma.hpp"
#include "longremix/rng.hpp"
#include "longremix/selector.hpp"
#include "longremix/trainer.hpp"

namespace longremix {

inline constexpr int kMetricsSchemaVersion = 1;

struct DatasetSpec {
    std::string kind = "blobs";  // blobs | moons | csv
    std::size_t size = 2000;
    std::size_t test_size = 2000;
    int classes = 25;
    double spread = 0.04;
    std::string path;       // csv only
    std::string test_path;  // csv only, optional
    std::uint64_t seed = 0;
};

struct LemmaSpec {
    bool enabled = false;
    SelectionParams params;
    int zeta_min = 1;
    int zeta_max = 10;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 0;
};

struct OutputSpec {
    std::string dir = "out";
    bool prcurve = true;
    int tau_steps = 20;
    bool gmm_trace = false;
    bool plan_digest = false;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    DatasetSpec dataset;
    NoiseSpec noise;
    TrainConfig train;
    LemmaSpec lemma;
    OutputSpec output;

    /// Re-derives every per-component seed from `master`.
    void reseed(std::uint64_t master) {
        seed = master;
        dataset.seed = derive_seed(master, 1);
        noise.seed = derive_seed(master, 3);
        train.model_seed1 = derive_seed(master, 4);
        train.model_seed2 = derive_seed(master, 5);
        train.plan_seed = derive_seed(master, 6);
        lemma.seed = derive_seed(master, 7);
    }

    void validate() const {
        if (dataset.kind != "blobs" && dataset.kind != "moons" && dataset.kind != "csv")
            throw ConfigError("dataset.kind must be blobs, moons or csv");
        if (dataset.kind == "csv" && dataset.path.empty()) throw ConfigError("dataset.path is required for csv data");
        if (dataset.kind != "csv") {
            if (dataset.size < 4) throw ConfigError("dataset.size must be at least 4");
            if (dataset.test_size < 1) throw ConfigError("dataset.test_size must be at least 1");
            if (dataset.classes < 2) throw ConfigError("dataset.classes must be at least 2");
            if (dataset.kind == "moons" && dataset.classes != 2) throw ConfigError("dataset.classes must be 2 for moons");
            if (!(dataset.spread >= 0.0)) throw ConfigError("dataset.spread must be non-negative");
        }
        if (!(noise.rate >= 0.0 && noise.rate < 1.0)) throw ConfigError("noise.rate must lie in [0, 1)");
        if (noise.kind == NoiseKind::asymmetric && noise.rate >= 0.5)
            throw ConfigError("noise.rate must be below 0.5 for asymmetric noise");
        if (noise.kind == NoiseKind::asymmetric && noise.rate > 0.0 && noise.mapping.empty())
            throw ConfigError("noise.mapping is required for asymmetric noise");
        train.validate();
        if (lemma.enabled) {
            lemma.params.validate();
            if (lemma.zeta_min < 1 || lemma.zeta_max < lemma.zeta_min) throw ConfigError("lemma.zeta_min/zeta_max");
        }
        if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
        if (output.tau_steps < 1) throw ConfigError("output.tau_steps must be at least 1");
    }
};

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& v) {
    Int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (auto f : split_commas(v)) out.push_back(parse_integer<int>(key, std::string(trim(f))));
    return out;
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

/// "0:1,1:0" -> {0 -> 1, 1 -> 0}. Empty string -> no mapping.
inline std::map<int, int> parse_mapping(const std::string& key, const std::string& v) {
    std::map<int, int> out;
    if (v.empty()) return out;
    for (auto f : split_commas(v)) {
        const std::string pair(trim(f));
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw ConfigError(key + ": expected src:dst pairs, got '" + pair + "'");
        const int src = parse_integer<int>(key, pair.substr(0, colon));
        if (out.count(src)) throw ConfigError(key + ": class " + std::to_string(src) + " mapped twice");
        out[src] = parse_integer<int>(key, pair.substr(colon + 1));
    }
    return out;
}

inline std::string format_mapping(const std::map<int, int>& m) {
    std::string s;
    for (const auto& [src, dst] : m) s += (s.empty() ? "" : ",") + std::to_string(src) + ":" + std::to_string(dst);
    return s;
}

}  // namespace detail

/// Applies one `key = value` assignment. Unknown keys are a ConfigError naming the key.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    auto& t = c.train;
    if (key == "seed") c.seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "dataset.kind") c.dataset.kind = v;
    else if (key == "dataset.size") c.dataset.size = parse_integer<std::size_t>(key, v);
    else if (key == "dataset.test_size") c.dataset.test_size = parse_integer<std::size_t>(key, v);
    else if (key == "dataset.classes") c.dataset.classes = parse_integer<int>(key, v);
    else if (key == "dataset.spread") c.dataset.spread = parse_double(key, v);
    else if (key == "dataset.path") c.dataset.path = v;
    else if (key == "dataset.test_path") c.dataset.test_path = v;
    else if (key == "dataset.seed") c.dataset.seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "noise.kind") {
        if (v == "symmetric") c.noise.kind = NoiseKind::symmetric;
        else if (v == "asymmetric") c.noise.kind = NoiseKind::asymmetric;
        else throw ConfigError(key + ": expected symmetric or asymmetric, got '" + v + "'");
    }
    else if (key == "noise.rate") c.noise.rate = parse_double(key, v);
    else if (key == "noise.mapping") c.noise.mapping = parse_mapping(key, v);
    else if (key == "noise.seed") c.noise.seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "train.mode") {
        const auto m = parse_train_mode(v);
        if (!m) throw ConfigError(key + ": unknown mode '" + v + "'");
        t.mode = *m;
    }
    else if (key == "train.tau") t.tau = parse_double(key, v);
    else if (key == "train.zeta") t.zeta = parse_integer<int>(key, v);
    else if (key == "train.alpha") t.alpha = parse_double(key, v);
    else if (key == "train.lambda_reg") t.lambda_reg = parse_double(key, v);
    else if (key == "train.lambda_u") t.lambda_u = parse_double(key, v);
    else if (key == "train.epochs") t.epochs = parse_integer<int>(key, v);
    else if (key == "train.warmup_epochs") t.warmup_epochs = parse_integer<int>(key, v);
    else if (key == "train.batch_size") t.batch_size = parse_integer<int>(key, v);
    else if (key == "train.hidden") t.hidden = parse_int_list(key, v);
    else if (key == "train.learning_rate") t.learning_rate = parse_double(key, v);
    else if (key == "train.lr_decay") t.lr_decay = parse_double(key, v);
    else if (key == "train.momentum") t.momentum = parse_double(key, v);
    else if (key == "train.weight_decay") t.weight_decay = parse_double(key, v);
    else if (key == "train.normalize_losses") t.normalize_losses = parse_bool(key, v);
    else if (key == "train.model_seed1") t.model_seed1 = parse_integer<std::uint64_t>(key, v);
    else if (key == "train.model_seed2") t.model_seed2 = parse_integer<std::uint64_t>(key, v);
    else if (key == "train.plan_seed") t.plan_seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "lemma.enabled") c.lemma.enabled = parse_bool(key, v);
    else if (key == "lemma.p_cc") c.lemma.params.p_cc = parse_double(key, v);
    else if (key == "lemma.p_nn") c.lemma.params.p_nn = parse_double(key, v);
    else if (key == "lemma.p_c") c.lemma.params.p_c = parse_double(key, v);
    else if (key == "lemma.zeta_min") c.lemma.zeta_min = parse_integer<int>(key, v);
    else if (key == "lemma.zeta_max") c.lemma.zeta_max = parse_integer<int>(key, v);
    else if (key == "lemma.trials") c.lemma.trials = parse_integer<std::uint64_t>(key, v);
    else if (key == "lemma.seed") c.lemma.seed = parse_integer<std::uint64_t>(key, v);
    else if (key == "output.dir") c.output.dir = v;
    else if (key == "output.prcurve") c.output.prcurve = parse_bool(key, v);
    else if (key == "output.tau_steps") c.output.tau_steps = parse_integer<int>(key, v);
    else if (key == "output.gmm_trace") c.output.gmm_trace = parse_bool(key, v);
    else if (key == "output.plan_digest") c.output.plan_digest = parse_bool(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

/// Every key with its effective value, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> to_kv(const ExperimentConfig& c) {
    using detail::format_double;
    const auto& t = c.train;
    const auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    const auto u = [](std::uint64_t v) { return std::to_string(v); };
    return {
        {"seed", u(c.seed)},
        {"dataset.kind", c.dataset.kind},
        {"dataset.size", u(c.dataset.size)},
        {"dataset.test_size", u(c.dataset.test_size)},
        {"dataset.classes", std::to_string(c.dataset.classes)},
        {"dataset.spread", format_double(c.dataset.spread)},
        {"dataset.path", c.dataset.path},
        {"dataset.test_path", c.dataset.test_path},
        {"dataset.seed", u(c.dataset.seed)},
        {"noise.kind", to_string(c.noise.kind)},
        {"noise.rate", format_double(c.noise.rate)},
        {"noise.mapping", detail::format_mapping(c.noise.mapping)},
        {"noise.seed", u(c.noise.seed)},
        {"train.mode", to_string(t.mode)},
        {"train.tau", format_double(t.tau)},
        {"train.zeta", std::to_string(t.zeta)},
        {"train.alpha", format_double(t.alpha)},
        {"train.lambda_reg", format_double(t.lambda_reg)},
        {"train.lambda_u", format_double(t.lambda_u)},
        {"train.epochs", std::to_string(t.epochs)},
        {"train.warmup_epochs", std::to_string(t.warmup_epochs)},
        {"train.batch_size", std::to_string(t.batch_size)},
        {"train.hidden", detail::join_ints(t.hidden)},
        {"train.learning_rate", format_double(t.learning_rate)},
        {"train.lr_decay", format_double(t.lr_decay)},
        {"train.momentum", format_double(t.momentum)},
        {"train.weight_decay", format_double(t.weight_decay)},
        {"train.normalize_losses", b(t.normalize_losses)},
        {"train.model_seed1", u(t.model_seed1)},
        {"train.model_seed2", u(t.model_seed2)},
        {"train.plan_seed", u(t.plan_seed)},
        {"lemma.enabled", b(c.lemma.enabled)},
        {"lemma.p_cc", format_double(c.lemma.params.p_cc)},
        {"lemma.p_nn", format_double(c.lemma.params.p_nn)},
        {"lemma.p_c", format_double(c.lemma.params.p_c)},
        {"lemma.zeta_min", std::to_string(c.lemma.zeta_min)},
        {"lemma.zeta_max", std::to_string(c.lemma.zeta_max)},
        {"lemma.trials", u(c.lemma.trials)},
        {"lemma.seed", u(c.lemma.seed)},
        {"output.dir", c.output.dir},
        {"output.prcurve", b(c.output.prcurve)},
        {"output.tau_steps", std::to_string(c.output.tau_steps)},
        {"output.gmm_trace", b(c.output.gmm_trace)},
        {"output.plan_digest", b(c.output.plan_digest)},
    };
}

inline std::string format_config(const ExperimentConfig& c) {
    std::string s;
    for (const auto& [k, v] : to_kv(c)) s += k + " = " + v + "\n";
    return s;
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Seeds not given explicitly are derived from the top-level `seed`.
inline ExperimentConfig parse_config(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> assignments;
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body(detail::trim(line));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        std::string key(detail::trim(std::string_view(body).substr(0, eq)));
        std::string value(detail::trim(std::string_view(body).substr(eq + 1)));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (seen.count(key))
            throw ConfigError("key '" + key + "' repeated on line " + std::to_string(line_no) + " (first on line " +
                              std::to_string(seen[key]) + ")");
        seen[key] = line_no;
        assignments.emplace_back(std::move(key), std::move(value));
    }
    ExperimentConfig c;
    for (const auto& [k, v] : assignments)
        if (k == "seed") set_config_value(c, k, v);
    c.reseed(c.seed);
    for (const auto& [k, v] : assignments)
        if (k != "seed") set_config_value(c, k, v);
    c.validate();
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

struct ExperimentData {
    NoisyDataset train;
    NoisyDataset test;
    bool test_is_train = false;  // csv without a test file: scored against true training labels
};

inline ExperimentData prepare_data(const ExperimentConfig& c) {
    ExperimentData d;
    NoisyDataset clean;
    if (c.dataset.kind == "csv") {
        clean = load_csv_dataset(c.dataset.path);
        if (!c.dataset.test_path.empty()) {
            d.test = load_csv_dataset(c.dataset.test_path, clean.class_names);
        } else {
            d.test = clean;
            d.test_is_train = true;
        }
    } else {
        const auto kind = c.dataset.kind == "moons" ? SyntheticKind::moons : SyntheticKind::blobs;
        clean = make_synthetic_dataset(kind, c.dataset.size, c.dataset.classes, c.dataset.spread,
                                       derive_seed(c.dataset.seed, 1));
        d.test = make_synthetic_dataset(kind, c.dataset.test_size, c.dataset.classes, c.dataset.spread,
                                        derive_seed(c.dataset.seed, 2));
    }
    d.train = inject_noise(std::move(clean), c.noise);
    return d;
}

struct CurvePoint {
    double tau = 0.0;
    int model = 1;
    CleanSetMetrics baseline;
    CleanSetMetrics hct;
    std::size_t baseline_size = 0;
    std::size_t hct_size = 0;
};

/// Baseline splits from the newest posteriors and HCT splits from the full
/// window, recomputed for every tau in the grid. At tau = 1 membership is
/// strict (posterior > 1), so X is empty there.
inline std::vector<CurvePoint> pr_curve(std::span<const LossHistory> histories, const std::vector<bool>& noise_mask,
                                        std::span<const double> taus, std::size_t zeta) {
    std::vector<CurvePoint> out;
    for (std::size_t m = 0; m < histories.size(); ++m) {
        const auto& h = histories[m];
        const Matrix none = Matrix::Zero(static_cast<Index>(h.samples()), 1);
        for (double tau : taus) {
            const double cut = tau >= 1.0 ? std::nextafter(1.0, 2.0) : tau;
            const SplitSets base = baseline_split(h.posteriors(0), cut, none);
            const SplitSets hct = hct_split(h, zeta, cut, none);
            CurvePoint pt;
            pt.tau = tau;
            pt.model = static_cast<int>(m) + 1;
            pt.baseline = clean_set_metrics(base, noise_mask);
            pt.hct = clean_set_metrics(hct, noise_mask);
            pt.baseline_size = base.labelled.size();
            pt.hct_size = hct.labelled.size();
            out.push_back(pt);
        }
    }
    return out;
}

inline std::vector<double> tau_grid(int steps) {
    std::vector<double> g;
    for (int k = 0; k <= steps; ++k) g.push_back(static_cast<double>(k) / steps);
    return g;
}

inline void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& os) {
    os << "tau,model,baseline_precision,baseline_recall,hct_precision,hct_recall,baseline_size,hct_size\n";
    os << std::setprecision(6);
    for (const auto& p : curve)
        os << p.tau << ',' << p.model << ',' << p.baseline.precision << ',' << p.baseline.recall << ','
           << p.hct.precision << ',' << p.hct.recall << ',' << p.baseline_size << ',' << p.hct_size << '\n';
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson metrics_json(const CleanSetMetrics& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"tp", m.true_positives},
            {"fp", m.false_positives},
            {"fn", m.false_negatives},
            {"precision_by_convention", m.precision_by_convention},
            {"recall_by_convention", m.recall_by_convention}};
}

inline ojson epoch_json(const EpochRecord& e) {
    ojson models = ojson::array();
    for (const auto& m : e.models) {
        ojson row = {{"labelled", m.labelled},
                     {"unlabelled", m.unlabelled},
                     {"clean", metrics_json(m.clean)},
                     {"mix_operations", m.mix_operations},
                     {"degenerate", m.degenerate}};
        if (e.phase == EpochPhase::cotrain)
            row["gmm"] = {{"weights", m.gmm.weights},
                          {"means", m.gmm.means},
                          {"variances", m.gmm.variances},
                          {"clean_component", m.gmm.clean_component},
                          {"collapsed", m.gmm.collapsed}};
        models.push_back(std::move(row));
    }
    ojson j = {{"epoch", e.epoch},
               {"cotrain_epoch", e.cotrain_epoch},
               {"phase", to_string(e.phase)},
               {"learning_rate", e.learning_rate},
               {"test_accuracy", e.test_accuracy}};
    if (e.phase == EpochPhase::cotrain) {
        j["split_kind"] = to_string(e.split_kind);
        j["models"] = std::move(models);
    }
    return j;
}

inline ojson last10_json(const RunRecord& r) {
    const auto v = r.last10_accuracy();
    return v ? ojson(*v) : ojson(nullptr);
}

inline std::string sig6(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace detail

struct ExperimentResult {
    ExperimentConfig config;
    TrainingResult training;
    std::size_t flipped = 0;
    bool test_is_train = false;
    std::vector<CurvePoint> curve;
    std::vector<SweepRow> lemma_rows;
};

/// Metrics document: config echo, per-stage epochs, summary and core set.
inline nlohmann::ordered_json metrics_document(const ExperimentResult& r, const std::vector<std::string>& files) {
    using detail::ojson;
    ojson config = ojson::object();
    for (const auto& [k, v] : to_kv(r.config)) config[k] = v;
    ojson stages = ojson::array();
    std::vector<std::string> warnings;
    for (const auto& s : r.training.stages) {
        ojson epochs = ojson::array();
        for (const auto& e : s.epochs) epochs.push_back(detail::epoch_json(e));
        stages.push_back({{"stage", s.stage},
                          {"best_acc", s.best_accuracy()},
                          {"last10_acc", detail::last10_json(s)},
                          {"epochs", std::move(epochs)}});
        warnings.insert(warnings.end(), s.warnings.begin(), s.warnings.end());
    }
    const auto& fin = r.training.final_record();
    ojson doc = {{"schema_version", kMetricsSchemaVersion},
                 {"config", std::move(config)},
                 {"noise", noise_sidecar(r.config.noise, r.flipped)},
                 {"evaluation", r.test_is_train ? "training-features-true-labels" : "held-out"},
                 {"stages", std::move(stages)},
                 {"summary", {{"mode", to_string(r.training.mode)},
                              {"best_acc", fin.best_accuracy()},
                              {"last10_acc", detail::last10_json(fin)}}}};
    doc["core_set"] = nullptr;
    for (const auto& s : r.training.stages)
        if (s.core_set)
            doc["core_set"] = {{"epoch", s.core_set->epoch},
                               {"size", s.core_set->size},
                               {"clean", detail::metrics_json(s.core_set->clean)}};
    doc["warnings"] = warnings;
    doc["files"] = files;
    return doc;
}

inline void write_epochs_csv(const TrainingResult& t, std::ostream& os) {
    using detail::sig6;
    os << "stage,epoch,phase,split,learning_rate,test_accuracy,x_1,u_1,precision_1,recall_1,x_2,u_2,precision_2,"
          "recall_2\n";
    for (const auto& s : t.stages)
        for (const auto& e : s.epochs) {
            os << s.stage << ',' << e.epoch << ',' << to_string(e.phase) << ','
               << (e.phase == EpochPhase::cotrain ? to_string(e.split_kind) : std::string()) << ','
               << sig6(e.learning_rate) << ',' << sig6(e.test_accuracy);
            for (const auto& m : e.models) {
                if (e.phase == EpochPhase::cotrain)
                    os << ',' << m.labelled << ',' << m.unlabelled << ',' << sig6(m.clean.precision) << ','
                       << sig6(m.clean.recall);
                else
                    os << ",,,,";
            }
            os << '\n';
        }
}

/// 64-bit FNV-1a over a plan's anchor/partner indices.
inline std::uint64_t plan_digest(const EpochPlan& plan) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& d : plan.labelled_draws) mix(d.anchor), mix(d.partner);
    mix(~0ULL);
    for (const auto& d : plan.unlabelled_draws) mix(d.anchor), mix(d.partner);
    return h;
}

/// Runs the configured experiment and writes the bundle into `out_dir`.
/// Returns the emitted file names (relative to `out_dir`), manifest last.
/// If training throws, a FAILED marker is written before rethrowing.
inline std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                               ExperimentResult* result_out = nullptr) {
    namespace fs = std::filesystem;
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());
    const fs::path dir(out_dir);
    auto open = [&](const std::string& name) {
        std::ofstream os(dir / name, std::ios::binary);
        if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
        return os;
    };
    std::vector<std::string> files;

    ExperimentResult r;
    r.config = cfg;
    std::ofstream gmm_log, plan_log;
    try {
        ExperimentData data = prepare_data(cfg);
        r.flipped = data.train.noisy_count();
        r.test_is_train = data.test_is_train;

        TrainObserver obs;
        if (cfg.output.gmm_trace) {
            gmm_log = open("gmm.jsonl");
            files.push_back("gmm.jsonl");
            obs.on_gmm = [&](const std::string& stage, int epoch, int model, const GmmParams& g) {
                nlohmann::ordered_json j = {{"stage", stage},       {"epoch", epoch},         {"model", model},
                                            {"weights", g.weights}, {"means", g.means},       {"variances", g.variances},
                                            {"clean_component", g.clean_component}, {"collapsed", g.collapsed}};
                gmm_log << j.dump() << '\n';
            };
        }
        if (cfg.output.plan_digest) {
            plan_log = open("plans.csv");
            files.push_back("plans.csv");
            plan_log << "stage,epoch,model,labelled_draws,unlabelled_draws,digest\n";
            obs.on_plan = [&](const std::string& stage, int epoch, int model, const EpochPlan& p) {
                std::ostringstream hex;
                hex << std::hex << std::setw(16) << std::setfill('0') << plan_digest(p);
                plan_log << stage << ',' << epoch << ',' << model << ',' << p.labelled_draws.size() << ','
                         << p.unlabelled_draws.size() << ',' << hex.str() << '\n';
            };
        }
        r.training = run_training(cfg.train, data.train, data.test, &obs);

        if (cfg.output.prcurve && r.training.stage1_histories) {
            const auto& h = *r.training.stage1_histories;
            r.curve = pr_curve(h, data.train.noise_mask, tau_grid(cfg.output.tau_steps),
                               static_cast<std::size_t>(cfg.train.zeta));
        }
        if (cfg.lemma.enabled) {
            r.lemma_rows =
                sweep_zeta(cfg.lemma.params, cfg.lemma.zeta_min, cfg.lemma.zeta_max, cfg.lemma.trials, cfg.lemma.seed);
        }
    } catch (const std::exception& e) {
        auto os = open("FAILED");
        os << "run failed: " << e.what() << '\n';
        for (const auto& f : files) os << "partial: " << f << '\n';
        throw;
    }

    {
        auto os = open("epochs.csv");
        write_epochs_csv(r.training, os);
        files.push_back("epochs.csv");
    }
    if (!r.curve.empty()) {
        auto os = open("prcurve.csv");
        write_curve_csv(r.curve, os);
        files.push_back("prcurve.csv");
    }
    if (!r.lemma_rows.empty()) {
        auto os = open("lemma.csv");
        write_sweep_csv(r.lemma_rows, os);
        files.push_back("lemma.csv");
    }
    {
        auto os = open("noise.json");
        os << noise_sidecar(cfg.noise, r.flipped).dump(2) << '\n';
        files.push_back("noise.json");
    }
    {
        auto os = open("config.txt");
        os << format_config(cfg);
        files.push_back("config.txt");
    }
    files.push_back("metrics.json");
    {
        auto os = open("metrics.json");
        os << metrics_document(r, files).dump(2) << '\n';
    }
    files.push_back("manifest.json");
    {
        nlohmann::ordered_json manifest = {{"schema_version", kMetricsSchemaVersion}, {"files", files}};
        auto os = open("manifest.json");
        os << manifest.dump(2) << '\n';
    }
    if (result_out) *result_out = std::move(r);
    return files;
}

}  // namespace longremix
