#pragma once

// Clean/noisy set construction: single-epoch thresholding, the confidence
// window filter, core-set capture and the core-set guided split.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "longremix/error.hpp"
#include "longremix/nn.hpp"

namespace longremix {

enum class SplitKind { baseline, hct, guided };

inline std::string to_string(SplitKind k) {
    switch (k) {
        case SplitKind::baseline: return "baseline";
        case SplitKind::hct: return "hct";
        case SplitKind::guided: return "guided";
    }
    return "?";
}

/// Labelled set X and unlabelled set U. Per-sample arrays (`weights`,
/// `in_labelled`) are indexed by dataset position; `guessed` holds the label
/// distribution used for every sample in U (rows indexed by dataset position,
/// rows of X members are unused).
struct SplitSets {
    SplitKind kind = SplitKind::baseline;
    std::vector<std::size_t> labelled;
    std::vector<std::size_t> unlabelled;
    std::vector<double> weights;
    std::vector<bool> in_labelled;
    Matrix guessed;

    std::size_t size() const { return weights.size(); }
};

/// Posteriors of the last few epochs, newest last.
class LossHistory {
public:
    LossHistory(std::size_t capacity, double tau) : capacity_(capacity), tau_(tau) {
        if (capacity == 0) throw ConfigError("loss history capacity must be at least 1");
    }

    void push(std::vector<double> posteriors) {
        if (!window_.empty() && posteriors.size() != window_.back().size())
            throw ShapeError("loss history: posterior vector length changed");
        window_.push_back(std::move(posteriors));
        if (window_.size() > capacity_) window_.pop_front();
        ++epoch_;
    }

    std::size_t depth() const { return window_.size(); }
    std::size_t capacity() const { return capacity_; }
    int epoch() const { return epoch_; }
    double tau() const { return tau_; }
    std::size_t samples() const { return window_.empty() ? 0 : window_.back().size(); }

    /// back = 0 is the current epoch, back = 1 the previous one, ...
    std::span<const double> posteriors(std::size_t back = 0) const {
        if (back >= window_.size()) throw StateError("loss history: epoch not retained");
        return window_[window_.size() - 1 - back];
    }

    bool verdict(std::size_t back, std::size_t sample) const { return posteriors(back)[sample] >= tau_; }

private:
    std::size_t capacity_;
    double tau_;
    int epoch_ = 0;
    std::deque<std::vector<double>> window_;
};

namespace detail {

inline SplitSets assemble_split(SplitKind kind, std::vector<bool> in_labelled, std::vector<double> weights,
                                const Matrix& guessed) {
    SplitSets s;
    s.kind = kind;
    for (std::size_t i = 0; i < in_labelled.size(); ++i) (in_labelled[i] ? s.labelled : s.unlabelled).push_back(i);
    s.in_labelled = std::move(in_labelled);
    s.weights = std::move(weights);
    s.guessed = guessed;
    return s;
}

inline void check_guessed(const Matrix& guessed, std::size_t n) {
    if (static_cast<std::size_t>(guessed.rows()) != n)
        throw ShapeError("guessed label matrix rows do not match the number of samples");
}

}  // namespace detail

/// X = {i : posterior_i >= tau}, U = the rest; w_i = posterior_i.
inline SplitSets baseline_split(std::span<const double> posteriors, double tau, const Matrix& guessed) {
    detail::check_guessed(guessed, posteriors.size());
    std::vector<bool> in(posteriors.size());
    for (std::size_t i = 0; i < posteriors.size(); ++i) in[i] = posteriors[i] >= tau;
    return detail::assemble_split(SplitKind::baseline, std::move(in), {posteriors.begin(), posteriors.end()},
                                  guessed);
}

/// X1 = samples whose posterior was >= tau in each of the last `zeta` epochs.
/// Weights are the current-epoch posteriors.
inline SplitSets hct_split(const LossHistory& history, std::size_t zeta, double tau, const Matrix& guessed) {
    if (zeta == 0) throw ConfigError("confidence window must be at least 1");
    if (history.depth() < zeta)
        throw StateError("confidence window underfilled: " + std::to_string(history.depth()) + " of " +
                         std::to_string(zeta) + " epochs recorded");
    const auto current = history.posteriors(0);
    detail::check_guessed(guessed, current.size());
    std::vector<bool> in(current.size(), true);
    for (std::size_t back = 0; back < zeta; ++back) {
        const auto p = history.posteriors(back);
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!(p[i] >= tau)) in[i] = false;
    }
    return detail::assemble_split(SplitKind::hct, std::move(in), {current.begin(), current.end()}, guessed);
}

/// The high-confidence set X1 of one stage-1 epoch.
struct StageSnapshot {
    int epoch = 0;
    std::vector<std::size_t> indices;
};

/// Core set H: sample indices with the observed labels they carried at capture.
struct CoreSet {
    std::vector<std::size_t> indices;  // ascending
    std::vector<int> labels;
    int epoch = -1;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
    bool contains(std::size_t i) const { return std::binary_search(indices.begin(), indices.end(), i); }
};

/// First epoch (1-based) eligible for core-set capture: ceil(E / 2).
inline int core_set_first_epoch(int total_epochs) { return (total_epochs + 1) / 2; }

/// Largest snapshot among epochs ceil(E/2)..E; ties go to the latest epoch.
/// `labels` are the observed labels of the dataset.
inline CoreSet select_core_set(std::span<const StageSnapshot> records, int total_epochs, std::span<const int> labels) {
    const int first = core_set_first_epoch(total_epochs);
    const StageSnapshot* best = nullptr;
    for (const auto& r : records) {
        if (r.epoch < first || r.epoch > total_epochs) continue;
        if (!best || r.indices.size() > best->indices.size() ||
            (r.indices.size() == best->indices.size() && r.epoch > best->epoch))
            best = &r;
    }
    if (!best) throw StateError("no stage-1 snapshots in the core-set epoch range");
    CoreSet h;
    h.epoch = best->epoch;
    h.indices = best->indices;
    std::sort(h.indices.begin(), h.indices.end());
    h.indices.erase(std::unique(h.indices.begin(), h.indices.end()), h.indices.end());
    for (std::size_t i : h.indices) {
        if (i >= labels.size()) throw ShapeError("core-set index out of range");
        h.labels.push_back(labels[i]);
    }
    return h;
}

/// Baseline split with every core-set member forced into X with weight 1.
inline SplitSets guided_split(std::span<const double> posteriors, double tau, const Matrix& guessed, const CoreSet& core) {
    detail::check_guessed(guessed, posteriors.size());
    std::vector<bool> in(posteriors.size());
    std::vector<double> w(posteriors.begin(), posteriors.end());
    for (std::size_t i = 0; i < posteriors.size(); ++i) in[i] = posteriors[i] >= tau;
    for (std::size_t i : core.indices) {
        if (i >= posteriors.size()) throw ShapeError("core-set index out of range");
        in[i] = true;
        w[i] = 1.0;
    }
    return detail::assemble_split(core.empty() ? SplitKind::baseline : SplitKind::guided, std::move(in), std::move(w),
                                  guessed);
}

struct CleanSetMetrics {
    double precision = 1.0;
    double recall = 1.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    bool precision_by_convention = false;  // X was empty
    bool recall_by_convention = false;     // no clean samples at all
};

/// Precision and recall of X as a detector of clean samples.
inline CleanSetMetrics clean_set_metrics(const SplitSets& split, const std::vector<bool>& noise_mask) {
    if (noise_mask.size() != split.size()) throw ShapeError("clean_set_metrics: mask length mismatch");
    CleanSetMetrics m;
    for (std::size_t i : split.labelled) (noise_mask[i] ? m.false_positives : m.true_positives)++;
    for (std::size_t i : split.unlabelled)
        if (!noise_mask[i]) ++m.false_negatives;
    const auto tp = static_cast<double>(m.true_positives);
    if (m.true_positives + m.false_positives == 0) {
        m.precision = 1.0;
        m.precision_by_convention = true;
    } else {
        m.precision = tp / static_cast<double>(m.true_positives + m.false_positives);
    }
    if (m.true_positives + m.false_negatives == 0) {
        m.recall = 1.0;
        m.recall_by_convention = true;
    } else {
        m.recall = tp / static_cast<double>(m.true_positives + m.false_negatives);
    }
    return m;
}

}  // namespace longremix
