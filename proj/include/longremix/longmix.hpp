#pragma once

// MixUp sampling, epoch plans for the mixed sets X' and U', and the training
// objective evaluated on mixed batches.

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "longremix/error.hpp"
#include "longremix/nn.hpp"
#include "longremix/rng.hpp"
#include "longremix/selector.hpp"

namespace longremix {

/// lambda ~ Beta(alpha, alpha), via the ratio of two Gamma(alpha, 1) draws.
inline double sample_beta(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw ConfigError("Beta parameter alpha must be positive");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    const double a = gamma(rng);
    const double b = gamma(rng);
    if (a + b == 0.0) return 0.5;
    return std::clamp(a / (a + b), 0.0, 1.0);
}

struct MixedSample {
    Vector features;
    Vector target;
};

/// Convex combination lambda * a + (1 - lambda) * b of features and labels.
inline MixedSample mixup_pair(const Vector& xa, const Vector& ya, const Vector& xb, const Vector& yb, double lambda) {
    if (xa.size() != xb.size() || ya.size() != yb.size()) throw ShapeError("mixup_pair: dimension mismatch");
    return {lambda * xa + (1.0 - lambda) * xb, lambda * ya + (1.0 - lambda) * yb};
}

enum class PlanMode {
    baseline,  // |X'| = |U'| = |X|
    longmix,   // |X'| = |U'| = |D|
};

struct DrawInstruction {
    std::size_t anchor = 0;   // dataset index of the X or U member
    std::size_t partner = 0;  // dataset index drawn from X u U
};

/// Draw instructions for one epoch. `labelled_draws` build X', `unlabelled_draws`
/// build U'. An epoch with U empty is fully supervised and has no U' draws.
struct EpochPlan {
    std::vector<DrawInstruction> labelled_draws;
    std::vector<DrawInstruction> unlabelled_draws;
    bool fully_supervised = false;
    PlanMode mode = PlanMode::longmix;
    std::uint64_t seed = 0;

    std::size_t mix_operations() const { return labelled_draws.size() + unlabelled_draws.size(); }
};

/// LongMix: |D| anchors drawn with replacement from X and |D| from U.
/// Baseline: every X member once in shuffled order, and |X| anchors drawn with
/// replacement from U. In both modes partners are drawn uniformly with
/// replacement from X u U.
inline EpochPlan build_epoch_plan(const SplitSets& split, std::size_t dataset_size, PlanMode mode, std::uint64_t seed) {
    if (split.labelled.empty()) throw StateError("cannot build an epoch plan without labelled samples");
    if (split.labelled.size() + split.unlabelled.size() != dataset_size)
        throw ShapeError("split does not cover the dataset");
    Rng rng(seed);
    EpochPlan plan;
    plan.mode = mode;
    plan.seed = seed;
    plan.fully_supervised = split.unlabelled.empty();

    const std::size_t count = mode == PlanMode::longmix ? dataset_size : split.labelled.size();
    plan.labelled_draws.reserve(count);
    if (mode == PlanMode::longmix) {
        for (std::size_t k = 0; k < count; ++k)
            plan.labelled_draws.push_back({split.labelled[uniform_index(rng, split.labelled.size())], 0});
    } else {
        std::vector<std::size_t> order = split.labelled;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) plan.labelled_draws.push_back({i, 0});
    }
    for (auto& d : plan.labelled_draws) d.partner = uniform_index(rng, dataset_size);

    if (!plan.fully_supervised) {
        plan.unlabelled_draws.reserve(count);
        for (std::size_t k = 0; k < count; ++k)
            plan.unlabelled_draws.push_back({split.unlabelled[uniform_index(rng, split.unlabelled.size())], 0});
        for (auto& d : plan.unlabelled_draws) d.partner = uniform_index(rng, dataset_size);
    }
    return plan;
}

/// Per-sample training targets: one-hot observed labels for X members, guessed
/// distributions for U members.
inline Matrix training_targets(const SplitSets& split, std::span<const int> labels, int classes) {
    if (labels.size() != split.size()) throw ShapeError("training_targets: label count mismatch");
    Matrix t = Matrix::Zero(static_cast<Index>(labels.size()), classes);
    for (std::size_t i : split.labelled) t(static_cast<Index>(i), labels[i]) = 1.0;
    for (std::size_t i : split.unlabelled) t.row(static_cast<Index>(i)) = split.guessed.row(static_cast<Index>(i));
    return t;
}

enum class MixOrigin { labelled, unlabelled };

struct MixBatch {
    Matrix features;
    Matrix targets;
    std::vector<double> lambdas;
    MixOrigin origin = MixOrigin::labelled;

    Index rows() const { return features.rows(); }
};

/// Mixes each instruction's anchor with its partner using a fresh Beta(alpha, alpha) draw.
inline MixBatch mix_draws(std::span<const DrawInstruction> draws, const Matrix& features, const Matrix& targets,
                          double alpha, Rng& rng, MixOrigin origin) {
    MixBatch b;
    b.origin = origin;
    b.features.resize(static_cast<Index>(draws.size()), features.cols());
    b.targets.resize(static_cast<Index>(draws.size()), targets.cols());
    b.lambdas.reserve(draws.size());
    for (std::size_t k = 0; k < draws.size(); ++k) {
        const double lambda = sample_beta(alpha, rng);
        const auto a = static_cast<Index>(draws[k].anchor);
        const auto p = static_cast<Index>(draws[k].partner);
        const auto r = static_cast<Index>(k);
        b.features.row(r) = lambda * features.row(a) + (1.0 - lambda) * features.row(p);
        b.targets.row(r) = lambda * targets.row(a) + (1.0 - lambda) * targets.row(p);
        b.lambdas.push_back(lambda);
    }
    return b;
}

struct LossWeights {
    double unlabelled = 0.0;  // lambda_U'
    double reg = 0.0;         // lambda_reg
};

/// Mean cross-entropy over X' plus lambda_U' times mean squared error over U'.
inline double evr_loss(const MixBatch& xbatch, const MixBatch& ubatch, const Network& net, const LossWeights& w) {
    if (xbatch.rows() == 0) throw ShapeError("evr_loss: empty labelled batch");
    double loss = 0.0;
    const Matrix px = forward_batch(net, xbatch.features);
    for (Index r = 0; r < px.rows(); ++r)
        loss += cross_entropy(px.row(r).transpose(), xbatch.targets.row(r).transpose());
    loss /= static_cast<double>(px.rows());
    if (ubatch.rows() > 0 && w.unlabelled != 0.0) {
        const Matrix pu = forward_batch(net, ubatch.features);
        double u = 0.0;
        for (Index r = 0; r < pu.rows(); ++r)
            u += squared_error(pu.row(r).transpose(), ubatch.targets.row(r).transpose());
        loss += w.unlabelled * u / static_cast<double>(pu.rows());
    }
    return loss;
}

inline double total_loss(double evr, double reg, double reg_weight) { return evr + reg_weight * reg; }

/// Stacks X' rows over U' rows so the composite loss sees labelled rows first.
inline Batch stack_mixed(const MixBatch& xbatch, const MixBatch& ubatch) {
    Batch b;
    b.features.resize(xbatch.rows() + ubatch.rows(), xbatch.features.cols());
    b.targets.resize(xbatch.rows() + ubatch.rows(), xbatch.targets.cols());
    b.features.topRows(xbatch.rows()) = xbatch.features;
    b.targets.topRows(xbatch.rows()) = xbatch.targets;
    if (ubatch.rows() > 0) {
        b.features.bottomRows(ubatch.rows()) = ubatch.features;
        b.targets.bottomRows(ubatch.rows()) = ubatch.targets;
    }
    return b;
}

/// Full objective on one mixed mini-batch: evr + lambda_reg * KL(uniform || mean prediction).
inline double mixed_objective(const MixBatch& xbatch, const MixBatch& ubatch, const Network& net, const LossWeights& w) {
    const double evr = evr_loss(xbatch, ubatch, net, w);
    if (w.reg == 0.0) return evr;
    const Batch all = stack_mixed(xbatch, ubatch);
    return total_loss(evr, kl_regularizer(forward_batch(net, all.features)), w.reg);
}

inline CompositeLoss composite_for(const MixBatch& xbatch, const LossWeights& w) {
    return {xbatch.rows(), w.unlabelled, w.reg};
}

}  // namespace longremix
