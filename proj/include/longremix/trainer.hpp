#pragma once

// Two-network co-training: warm-up, high-confidence training (stage 1),
// core-set capture and guided retraining with LongMix plans (stage 2).

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "longremix/data.hpp"
#include "longremix/error.hpp"
#include "longremix/gmm.hpp"
#include "longremix/longmix.hpp"
#include "longremix/nn.hpp"
#include "longremix/rng.hpp"
#include "longremix/selector.hpp"

namespace longremix {

enum class TrainMode {
    cross_entropy,  // plain supervised training on the noisy labels
    baseline,       // single-epoch split, |X'| = |U'| = |X|
    longmix,        // single-epoch split, |X'| = |U'| = |D|
    retrain_only,   // HCT stage + guided retraining with baseline-size plans
    full_longremix  // HCT stage + guided retraining with LongMix plans
};

inline std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::cross_entropy: return "cross-entropy";
        case TrainMode::baseline: return "baseline";
        case TrainMode::longmix: return "longmix";
        case TrainMode::retrain_only: return "retrain-only";
        case TrainMode::full_longremix: return "full-longremix";
    }
    return "?";
}

inline std::optional<TrainMode> parse_train_mode(const std::string& s) {
    for (auto m : {TrainMode::cross_entropy, TrainMode::baseline, TrainMode::longmix, TrainMode::retrain_only,
                   TrainMode::full_longremix})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

inline bool has_stage1(TrainMode m) { return m == TrainMode::retrain_only || m == TrainMode::full_longremix; }

struct TrainConfig {
    double tau = 0.5;
    int zeta = 5;
    double alpha = 4.0;
    double lambda_reg = 1.0;
    double lambda_u = 25.0;
    int epochs = 60;  // per stage, after warm-up
    int warmup_epochs = 10;
    int batch_size = 64;
    std::vector<int> hidden{64, 64};
    double learning_rate = 0.02;
    double lr_decay = 0.1;  // applied at the midpoint of each stage
    double momentum = 0.8;
    double weight_decay = 5e-4;
    bool normalize_losses = true;
    std::uint64_t model_seed1 = 1;
    std::uint64_t model_seed2 = 2;
    std::uint64_t plan_seed = 3;
    TrainMode mode = TrainMode::full_longremix;

    void validate() const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("train.tau must lie in [0, 1]");
        if (zeta < 1) throw ConfigError("train.zeta must be at least 1");
        if (epochs < zeta) throw ConfigError("train.epochs must be at least train.zeta");
        if (warmup_epochs < 1) throw ConfigError("train.warmup_epochs must be at least 1");
        if (!(alpha > 0.0)) throw ConfigError("train.alpha must be positive");
        if (lambda_reg < 0.0) throw ConfigError("train.lambda_reg must be non-negative");
        if (lambda_u < 0.0) throw ConfigError("train.lambda_u must be non-negative");
        if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
        if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
        if (!(lr_decay > 0.0)) throw ConfigError("train.lr_decay must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train.momentum must lie in [0, 1)");
        if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be non-negative");
        for (int h : hidden)
            if (h < 1) throw ConfigError("train.hidden widths must be positive");
    }
};

enum class EpochPhase { warmup, supervised, cotrain };

inline std::string to_string(EpochPhase p) {
    switch (p) {
        case EpochPhase::warmup: return "warmup";
        case EpochPhase::supervised: return "supervised";
        case EpochPhase::cotrain: return "cotrain";
    }
    return "?";
}

/// Statistics of the split produced from one model's losses.
struct ModelEpochStats {
    std::size_t labelled = 0;
    std::size_t unlabelled = 0;
    CleanSetMetrics clean;
    GmmParams gmm;
    std::size_t mix_operations = 0;  // spent training the peer model on this split
    bool degenerate = false;         // X was empty; the peer fell back to a supervised pass
};

struct EpochRecord {
    int epoch = 0;          // 1-based within the stage, warm-up included
    int cotrain_epoch = 0;  // 1-based index among split epochs, 0 otherwise
    EpochPhase phase = EpochPhase::warmup;
    SplitKind split_kind = SplitKind::baseline;
    double learning_rate = 0.0;
    double test_accuracy = 0.0;
    std::array<ModelEpochStats, 2> models;
};

struct CoreSetSummary {
    int epoch = -1;
    std::size_t size = 0;
    CleanSetMetrics clean;
};

struct RunRecord {
    std::string stage;
    std::vector<EpochRecord> epochs;
    std::optional<CoreSetSummary> core_set;
    std::vector<std::string> warnings;

    double best_accuracy() const {
        double best = 0.0;
        for (const auto& e : epochs) best = std::max(best, e.test_accuracy);
        return best;
    }

    /// Mean test accuracy of the last 10 epochs; empty with fewer than 10.
    std::optional<double> last10_accuracy() const {
        if (epochs.size() < 10) return std::nullopt;
        double s = 0.0;
        for (std::size_t k = epochs.size() - 10; k < epochs.size(); ++k) s += epochs[k].test_accuracy;
        return s / 10.0;
    }
};

/// Optional diagnostics hooks.
struct TrainObserver {
    std::function<void(const std::string& stage, int epoch, int model, const GmmParams&)> on_gmm;
    std::function<void(const std::string& stage, int epoch, int model, const EpochPlan&)> on_plan;
    std::function<void(const std::string& stage, const EpochRecord&)> on_epoch;
};

/// Ensemble accuracy: argmax of the mean softmax of both networks, ties to
/// the lowest class index.
inline double evaluate(const Network& net1, const Network& net2, const Matrix& features, std::span<const int> labels) {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) throw ShapeError("evaluate: label count mismatch");
    if (labels.empty()) return 0.0;
    const Matrix p = 0.5 * (forward_batch(net1, features) + forward_batch(net2, features));
    std::size_t correct = 0;
    for (Index r = 0; r < p.rows(); ++r) {
        Index best = 0;
        for (Index c = 1; c < p.cols(); ++c)
            if (p(r, c) > p(r, best)) best = c;
        correct += static_cast<int>(best) == labels[static_cast<std::size_t>(r)];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double evaluate(const Network& net1, const Network& net2, const NoisyDataset& test) {
    return evaluate(net1, net2, test.features, test.true_labels);
}

/// Networks, optimizers and per-model loss histories of one co-training run.
struct CotrainState {
    std::array<Network, 2> nets;
    std::array<OptimizerState, 2> optimizers;
    std::array<LossHistory, 2> histories;
};

namespace detail {

inline constexpr std::uint64_t kStreamInit = 11;
inline constexpr std::uint64_t kStreamShuffle = 12;
inline constexpr std::uint64_t kStreamPlan = 13;
inline constexpr std::uint64_t kStreamMix = 14;

inline std::vector<int> layer_widths(const TrainConfig& cfg, Index input, int classes) {
    std::vector<int> w{static_cast<int>(input)};
    w.insert(w.end(), cfg.hidden.begin(), cfg.hidden.end());
    w.push_back(classes);
    return w;
}

inline std::uint64_t model_seed(const TrainConfig& cfg, int model) { return model == 0 ? cfg.model_seed1 : cfg.model_seed2; }

inline double scheduled_lr(const TrainConfig& cfg, int epoch_index, int stage_epochs) {
    return epoch_index < stage_epochs / 2 ? cfg.learning_rate : cfg.learning_rate * cfg.lr_decay;
}

inline Matrix one_hot(std::span<const int> labels, int classes) {
    Matrix t = Matrix::Zero(static_cast<Index>(labels.size()), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) t(static_cast<Index>(i), labels[i]) = 1.0;
    return t;
}

}  // namespace detail

/// Fresh networks for one stage. `stage` separates the initialisation streams
/// of stage 1 and stage 2.
inline CotrainState make_cotrain_state(const TrainConfig& cfg, const NoisyDataset& ds, std::uint64_t stage) {
    const auto widths = detail::layer_widths(cfg, ds.dim(), ds.num_classes);
    const std::size_t capacity = static_cast<std::size_t>(cfg.zeta);
    CotrainState s{{make_network(widths, 1, derive_seed(cfg.model_seed1, detail::kStreamInit, stage)),
                    make_network(widths, 2, derive_seed(cfg.model_seed2, detail::kStreamInit, stage))},
                   {},
                   {LossHistory(capacity, cfg.tau), LossHistory(capacity, cfg.tau)}};
    for (int k = 0; k < 2; ++k)
        s.optimizers[k] = make_optimizer(s.nets[k], cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    return s;
}

/// One supervised cross-entropy pass over all observed labels in shuffled order.
inline void supervised_pass(Network& net, OptimizerState& opt, const NoisyDataset& ds, int batch_size, std::uint64_t seed) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const Index d = ds.dim();
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        Batch b;
        b.features.resize(static_cast<Index>(end - start), d);
        b.targets = Matrix::Zero(static_cast<Index>(end - start), ds.num_classes);
        for (std::size_t k = start; k < end; ++k) {
            const auto r = static_cast<Index>(k - start);
            b.features.row(r) = ds.features.row(static_cast<Index>(order[k]));
            b.targets(r, ds.labels[order[k]]) = 1.0;
        }
        const auto g = backward(net, b, CrossEntropyLoss{});
        sgd_step(net, g.grads, opt);
    }
}

/// Both networks trained independently with cross-entropy on all observed labels.
inline void warmup(std::array<Network, 2>& nets, std::array<OptimizerState, 2>& opts, const NoisyDataset& ds, int epochs,
                   const TrainConfig& cfg, std::uint64_t stage, int first_epoch = 0) {
    if (epochs < 1) throw ConfigError("warmup needs at least one epoch");
    for (int e = 0; e < epochs; ++e)
        for (int k = 0; k < 2; ++k)
            supervised_pass(nets[k], opts[k], ds, cfg.batch_size,
                            derive_seed(detail::model_seed(cfg, k), detail::kStreamShuffle,
                                        (stage << 32) | static_cast<std::uint64_t>(first_epoch + e)));
}

/// One pass of the mixed objective over `plan`.
inline void train_on_plan(Network& net, OptimizerState& opt, const EpochPlan& plan, const Matrix& features,
                          const Matrix& targets, const TrainConfig& cfg, std::uint64_t mix_seed) {
    Rng rng(mix_seed);
    const LossWeights weights{cfg.lambda_u, cfg.lambda_reg};
    const std::size_t n = plan.labelled_draws.size();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const std::span<const DrawInstruction> xs(plan.labelled_draws);
    const std::span<const DrawInstruction> us(plan.unlabelled_draws);
    for (std::size_t start = 0; start < n; start += bs) {
        const std::size_t count = std::min(bs, n - start);
        const MixBatch xb = mix_draws(xs.subspan(start, count), features, targets, cfg.alpha, rng, MixOrigin::labelled);
        const MixBatch ub = plan.fully_supervised
                                ? MixBatch{Matrix(0, features.cols()), Matrix(0, targets.cols()), {}, MixOrigin::unlabelled}
                                : mix_draws(us.subspan(start, count), features, targets, cfg.alpha, rng,
                                            MixOrigin::unlabelled);
        const auto g = backward(net, stack_mixed(xb, ub), composite_for(xb, weights));
        sgd_step(net, g.grads, opt);
    }
}

enum class Selection { baseline, hct, guided };

struct CotrainOutcome {
    std::array<SplitSets, 2> splits;  // splits[k] comes from model k's losses and trains model 1 - k
    std::array<ModelEpochStats, 2> stats;
};

/// One co-training epoch. Model k's losses produce a split that trains model
/// 1 - k. `epoch` is the 1-based split epoch used to derive plan seeds.
inline CotrainOutcome cotrain_epoch(CotrainState& state, const NoisyDataset& ds, Selection selection, PlanMode plan_mode,
                                    const CoreSet* core, const TrainConfig& cfg, int epoch, std::uint64_t stage,
                                    const TrainObserver* observer = nullptr, const std::string& stage_name = {}) {
    CotrainOutcome out;
    std::array<std::vector<double>, 2> posteriors;
    for (int k = 0; k < 2; ++k) {
        LossVector lv = per_sample_losses(state.nets[k], ds, epoch);
        if (cfg.normalize_losses) lv = normalize_losses(std::move(lv));
        const GmmFit fit = fit_gmm_em(lv.values);
        out.stats[k].gmm = fit.params;
        if (observer && observer->on_gmm) observer->on_gmm(stage_name, epoch, k + 1, fit.params);
        posteriors[k] = clean_posteriors(fit.params, lv.values);
        state.histories[k].push(posteriors[k]);
    }
    const Matrix guessed = 0.5 * (forward_batch(state.nets[0], ds.features) + forward_batch(state.nets[1], ds.features));

    for (int k = 0; k < 2; ++k) {
        switch (selection) {
            case Selection::baseline: out.splits[k] = baseline_split(posteriors[k], cfg.tau, guessed); break;
            case Selection::hct:
                out.splits[k] = state.histories[k].depth() >= static_cast<std::size_t>(cfg.zeta)
                                    ? hct_split(state.histories[k], static_cast<std::size_t>(cfg.zeta), cfg.tau, guessed)
                                    : baseline_split(posteriors[k], cfg.tau, guessed);
                break;
            case Selection::guided:
                if (!core) throw StateError("guided selection needs a core set");
                out.splits[k] = guided_split(posteriors[k], cfg.tau, guessed, *core);
                break;
        }
        out.stats[k].labelled = out.splits[k].labelled.size();
        out.stats[k].unlabelled = out.splits[k].unlabelled.size();
        out.stats[k].clean = clean_set_metrics(out.splits[k], ds.noise_mask);
    }

    for (int k = 0; k < 2; ++k) {
        const int peer = 1 - k;
        const SplitSets& split = out.splits[k];
        const std::uint64_t tag = (stage << 40) | (static_cast<std::uint64_t>(epoch) << 2) | static_cast<std::uint64_t>(k);
        if (split.labelled.empty()) {
            out.stats[k].degenerate = true;
            supervised_pass(state.nets[peer], state.optimizers[peer], ds, cfg.batch_size,
                            derive_seed(cfg.plan_seed, detail::kStreamShuffle, tag));
            continue;
        }
        const EpochPlan plan = build_epoch_plan(split, ds.size(), plan_mode, derive_seed(cfg.plan_seed, detail::kStreamPlan, tag));
        if (observer && observer->on_plan) observer->on_plan(stage_name, epoch, k + 1, plan);
        out.stats[k].mix_operations = plan.mix_operations();
        const Matrix targets = training_targets(split, ds.labels, ds.num_classes);
        train_on_plan(state.nets[peer], state.optimizers[peer], plan, ds.features, targets, cfg,
                      derive_seed(cfg.plan_seed, detail::kStreamMix, tag));
    }
    return out;
}

struct StageOneResult {
    RunRecord record;
    CoreSet core;
    std::vector<StageSnapshot> snapshots;
    std::array<LossHistory, 2> final_histories{LossHistory(1, 0.5), LossHistory(1, 0.5)};
};

namespace detail {

inline void set_learning_rate(CotrainState& s, double lr) {
    for (auto& o : s.optimizers) o.learning_rate = lr;
}

inline EpochRecord warmup_record(int epoch, double lr, double acc) {
    EpochRecord r;
    r.epoch = epoch;
    r.phase = EpochPhase::warmup;
    r.learning_rate = lr;
    r.test_accuracy = acc;
    return r;
}

inline void run_warmup_epochs(CotrainState& s, const NoisyDataset& ds, const NoisyDataset& test, const TrainConfig& cfg,
                              std::uint64_t stage, int stage_epochs, RunRecord& rec, const TrainObserver* obs) {
    for (int e = 0; e < cfg.warmup_epochs; ++e) {
        const double lr = scheduled_lr(cfg, e, stage_epochs);
        set_learning_rate(s, lr);
        warmup(s.nets, s.optimizers, ds, 1, cfg, stage, e);
        rec.epochs.push_back(warmup_record(e + 1, lr, evaluate(s.nets[0], s.nets[1], test)));
        if (obs && obs->on_epoch) obs->on_epoch(rec.stage, rec.epochs.back());
    }
}

inline std::vector<std::size_t> intersect_sorted(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline CoreSetSummary summarize_core(const CoreSet& core, const NoisyDataset& ds) {
    CoreSetSummary s;
    s.epoch = core.epoch;
    s.size = core.size();
    SplitSets view;
    view.in_labelled.assign(ds.size(), false);
    for (std::size_t i : core.indices) view.in_labelled[i] = true;
    for (std::size_t i = 0; i < ds.size(); ++i) (view.in_labelled[i] ? view.labelled : view.unlabelled).push_back(i);
    view.weights.assign(ds.size(), 0.0);
    s.clean = clean_set_metrics(view, ds.noise_mask);
    return s;
}

// Shared epoch loop for the split-based stages.
inline RunRecord run_split_stage(const std::string& name, CotrainState& s, const NoisyDataset& ds,
                                 const NoisyDataset& test, const TrainConfig& cfg, Selection selection,
                                 PlanMode plan_mode, const CoreSet* core, std::uint64_t stage,
                                 const TrainObserver* obs, std::vector<StageSnapshot>* snapshots) {
    RunRecord rec;
    rec.stage = name;
    const int stage_epochs = cfg.warmup_epochs + cfg.epochs;
    run_warmup_epochs(s, ds, test, cfg, stage, stage_epochs, rec, obs);
    for (int e = 1; e <= cfg.epochs; ++e) {
        const int index = cfg.warmup_epochs + e - 1;
        const double lr = scheduled_lr(cfg, index, stage_epochs);
        set_learning_rate(s, lr);
        const auto out = cotrain_epoch(s, ds, selection, plan_mode, core, cfg, e, stage, obs, name);
        EpochRecord r;
        r.epoch = index + 1;
        r.cotrain_epoch = e;
        r.phase = EpochPhase::cotrain;
        r.split_kind = out.splits[0].kind;
        r.learning_rate = lr;
        r.models = out.stats;
        r.test_accuracy = evaluate(s.nets[0], s.nets[1], test);
        for (const auto& st : out.stats)
            if (st.degenerate)
                rec.warnings.push_back("epoch " + std::to_string(r.epoch) + ": empty labelled set, supervised fallback");
        if (snapshots)
            snapshots->push_back({e, intersect_sorted(out.splits[0].labelled, out.splits[1].labelled)});
        rec.epochs.push_back(r);
        if (obs && obs->on_epoch) obs->on_epoch(rec.stage, rec.epochs.back());
    }
    return rec;
}

}  // namespace detail

/// Warm-up followed by E epochs of high-confidence co-training. The core set
/// is the largest X1 (intersection of both models' high-confidence sets)
/// among epochs ceil(E/2)..E.
inline StageOneResult run_stage1_hct(const TrainConfig& cfg, const NoisyDataset& ds, const NoisyDataset& test,
                                     PlanMode plan_mode = PlanMode::baseline, const TrainObserver* obs = nullptr) {
    cfg.validate();
    CotrainState s = make_cotrain_state(cfg, ds, 1);
    StageOneResult out;
    out.record = detail::run_split_stage("stage1-hct", s, ds, test, cfg, Selection::hct, plan_mode, nullptr, 1, obs,
                                         &out.snapshots);
    out.core = select_core_set(out.snapshots, cfg.epochs, ds.labels);
    if (out.core.empty()) {
        out.record.warnings.push_back("core set is empty; stage 2 reduces to plain split training");
        std::clog << "warning: core set is empty\n";
    }
    out.record.core_set = detail::summarize_core(out.core, ds);
    out.final_histories = s.histories;
    return out;
}

/// Fresh networks retrained with the core set pinned into the labelled set.
inline RunRecord run_stage2_guided(const TrainConfig& cfg, const NoisyDataset& ds, const NoisyDataset& test,
                                   const CoreSet& core, PlanMode plan_mode = PlanMode::longmix,
                                   const TrainObserver* obs = nullptr) {
    cfg.validate();
    CotrainState s = make_cotrain_state(cfg, ds, 2);
    RunRecord rec = detail::run_split_stage("stage2-guided", s, ds, test, cfg, Selection::guided, plan_mode, &core, 2,
                                            obs, nullptr);
    if (core.empty()) rec.warnings.push_back("stage 2 ran with an empty core set");
    return rec;
}

/// Single-stage co-training with per-epoch baseline splits.
inline RunRecord run_single_stage(const TrainConfig& cfg, const NoisyDataset& ds, const NoisyDataset& test,
                                  PlanMode plan_mode, const TrainObserver* obs = nullptr) {
    cfg.validate();
    CotrainState s = make_cotrain_state(cfg, ds, 1);
    return detail::run_split_stage(plan_mode == PlanMode::longmix ? "longmix" : "baseline", s, ds, test, cfg,
                                   Selection::baseline, plan_mode, nullptr, 1, obs, nullptr);
}

/// Plain cross-entropy training for warm-up + E epochs.
inline RunRecord run_cross_entropy(const TrainConfig& cfg, const NoisyDataset& ds, const NoisyDataset& test,
                                   const TrainObserver* obs = nullptr) {
    cfg.validate();
    CotrainState s = make_cotrain_state(cfg, ds, 1);
    RunRecord rec;
    rec.stage = "cross-entropy";
    const int total = cfg.warmup_epochs + cfg.epochs;
    for (int e = 0; e < total; ++e) {
        const double lr = detail::scheduled_lr(cfg, e, total);
        detail::set_learning_rate(s, lr);
        warmup(s.nets, s.optimizers, ds, 1, cfg, 1, e);
        auto r = detail::warmup_record(e + 1, lr, evaluate(s.nets[0], s.nets[1], test));
        if (e >= cfg.warmup_epochs) r.phase = EpochPhase::supervised;
        rec.epochs.push_back(r);
        if (obs && obs->on_epoch) obs->on_epoch(rec.stage, rec.epochs.back());
    }
    return rec;
}

struct TrainingResult {
    TrainMode mode = TrainMode::full_longremix;
    std::vector<RunRecord> stages;
    std::optional<CoreSet> core;
    std::optional<std::array<LossHistory, 2>> stage1_histories;

    const RunRecord& final_record() const { return stages.back(); }
};

/// Runs the configured mode end to end on a (possibly noisy) training set.
inline TrainingResult run_training(const TrainConfig& cfg, const NoisyDataset& ds, const NoisyDataset& test,
                                   const TrainObserver* obs = nullptr) {
    cfg.validate();
    if (test.num_classes != ds.num_classes || test.dim() != ds.dim())
        throw ShapeError("test set shape does not match the training set");
    TrainingResult r;
    r.mode = cfg.mode;
    switch (cfg.mode) {
        case TrainMode::cross_entropy: r.stages.push_back(run_cross_entropy(cfg, ds, test, obs)); break;
        case TrainMode::baseline: r.stages.push_back(run_single_stage(cfg, ds, test, PlanMode::baseline, obs)); break;
        case TrainMode::longmix: r.stages.push_back(run_single_stage(cfg, ds, test, PlanMode::longmix, obs)); break;
        case TrainMode::retrain_only:
        case TrainMode::full_longremix: {
            auto s1 = run_stage1_hct(cfg, ds, test, PlanMode::baseline, obs);
            const PlanMode stage2 = cfg.mode == TrainMode::full_longremix ? PlanMode::longmix : PlanMode::baseline;
            r.stages.push_back(std::move(s1.record));
            r.stages.push_back(run_stage2_guided(cfg, ds, test, s1.core, stage2, obs));
            r.core = std::move(s1.core);
            r.stage1_histories = std::move(s1.final_histories);
            break;
        }
    }
    return r;
}

}  // namespace longremix
