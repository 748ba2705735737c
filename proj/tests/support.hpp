#pragma once

// Randomized property checks shared by the unit tests and the acceptance run.
// Each returns the number of violated cases out of `cases` trials.

#include <algorithm>
#include <cmath>

#include "longremix/longmix.hpp"
#include "longremix/selector.hpp"

namespace longremix::testing {

struct PropertyOutcome {
    std::size_t cases = 0;
    std::size_t violations = 0;
    bool ok() const { return cases > 0 && violations == 0; }
};

inline std::vector<double> random_posteriors(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // mix in exact 0, 1 and tau-valued entries so the boundaries are exercised
    for (auto& v : p) {
        const double r = u(rng);
        v = r < 0.05 ? 0.0 : r < 0.1 ? 1.0 : r < 0.15 ? 0.5 : u(rng);
    }
    return p;
}

inline bool is_partition(const SplitSets& s, std::size_t n) {
    if (s.labelled.size() + s.unlabelled.size() != n || s.in_labelled.size() != n) return false;
    std::vector<int> seen(n, 0);
    for (std::size_t i : s.labelled) {
        if (i >= n || !s.in_labelled[i]) return false;
        ++seen[i];
    }
    for (std::size_t i : s.unlabelled) {
        if (i >= n || s.in_labelled[i]) return false;
        ++seen[i];
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

inline bool is_subset(const SplitSets& inner, const SplitSets& outer) {
    for (std::size_t i : inner.labelled)
        if (!outer.in_labelled[i]) return false;
    return true;
}

enum class SelectorProperty { partition, window_subset, zeta_monotone, empty_core_reduction, core_override };

/// Draws `cases` random histories (size, depth, tau, posteriors, core set)
/// and checks one selector property on each.
inline PropertyOutcome check_selector_property(SelectorProperty prop, std::size_t cases, std::uint64_t seed) {
    PropertyOutcome out;
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 1 + uniform_index(rng, 60);
        const std::size_t zeta = 1 + uniform_index(rng, 6);
        const std::size_t depth = zeta + uniform_index(rng, 4);
        const double tau = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const double tau_used = uniform_index(rng, 10) == 0 ? 0.5 : tau;
        LossHistory h(zeta + 1, tau_used);
        for (std::size_t e = 0; e < depth; ++e) h.push(random_posteriors(rng, n));
        const Matrix guessed = Matrix::Constant(static_cast<Index>(n), 3, 1.0 / 3.0);
        bool ok = true;
        switch (prop) {
            case SelectorProperty::partition: {
                ok = is_partition(baseline_split(h.posteriors(), tau_used, guessed), n) &&
                     is_partition(hct_split(h, zeta, tau_used, guessed), n);
                CoreSet core;
                for (std::size_t i = 0; i < n; ++i)
                    if (uniform_index(rng, 3) == 0) core.indices.push_back(i), core.labels.push_back(0);
                ok = ok && is_partition(guided_split(h.posteriors(), tau_used, guessed, core), n);
                break;
            }
            case SelectorProperty::window_subset: {
                const auto x1 = hct_split(h, zeta, tau_used, guessed);
                for (std::size_t back = 0; back < zeta && ok; ++back)
                    ok = is_subset(x1, baseline_split(h.posteriors(back), tau_used, guessed));
                break;
            }
            case SelectorProperty::zeta_monotone: {
                if (h.depth() < zeta + 1) h.push(random_posteriors(rng, n));
                ok = is_subset(hct_split(h, zeta + 1, tau_used, guessed), hct_split(h, zeta, tau_used, guessed));
                break;
            }
            case SelectorProperty::empty_core_reduction: {
                const auto g = guided_split(h.posteriors(), tau_used, guessed, CoreSet{});
                const auto b = baseline_split(h.posteriors(), tau_used, guessed);
                ok = g.labelled == b.labelled && g.unlabelled == b.unlabelled && g.weights == b.weights &&
                     g.in_labelled == b.in_labelled && g.kind == b.kind;
                break;
            }
            case SelectorProperty::core_override: {
                CoreSet core;
                for (std::size_t i = 0; i < n; ++i)
                    if (uniform_index(rng, 2) == 0) core.indices.push_back(i), core.labels.push_back(0);
                const auto g = guided_split(h.posteriors(), tau_used, guessed, core);
                const auto post = h.posteriors();
                for (std::size_t i = 0; i < n && ok; ++i) {
                    if (core.contains(i)) ok = g.in_labelled[i] && g.weights[i] == 1.0;
                    else ok = g.in_labelled[i] == (post[i] >= tau_used) && g.weights[i] == post[i];
                }
                break;
            }
        }
        ++out.cases;
        out.violations += ok ? 0 : 1;
    }
    return out;
}

struct PlanLawOutcome {
    PropertyOutcome sizes;         // exact instruction counts and anchor/partner membership
    PropertyOutcome multiplicity;  // draws on a fixed half of X within 4 sigma
};

/// Random splits with |X| in [1, |D|]; checks LongMix and baseline plan sizes,
/// anchor sources and with-replacement multiplicities.
inline PlanLawOutcome check_plan_laws(std::size_t cases, std::uint64_t seed) {
    PlanLawOutcome out;
    Rng rng(seed);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t n = 2 + uniform_index(rng, 400);
        const std::size_t x_size = 1 + uniform_index(rng, n);
        std::vector<double> post(n, 0.0);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t k = 0; k < x_size; ++k) post[order[k]] = 1.0;
        const auto split = baseline_split(post, 0.5, Matrix::Zero(static_cast<Index>(n), 2));
        const std::uint64_t plan_seed = rng();

        const auto lm = build_epoch_plan(split, n, PlanMode::longmix, plan_seed);
        const auto bl = build_epoch_plan(split, n, PlanMode::baseline, plan_seed);
        const bool has_u = !split.unlabelled.empty();
        bool ok = lm.labelled_draws.size() == n && lm.unlabelled_draws.size() == (has_u ? n : 0) &&
                  bl.labelled_draws.size() == x_size && bl.unlabelled_draws.size() == (has_u ? x_size : 0) &&
                  lm.fully_supervised == !has_u;
        for (const auto* plan : {&lm, &bl}) {
            for (const auto& d : plan->labelled_draws) ok = ok && split.in_labelled[d.anchor] && d.partner < n;
            for (const auto& d : plan->unlabelled_draws) ok = ok && !split.in_labelled[d.anchor] && d.partner < n;
        }
        ++out.sizes.cases;
        out.sizes.violations += ok ? 0 : 1;

        // anchors of X' are multinomial(|D|, 1/|X|) over X; the draws landing on
        // the first half of X are binomial(|D|, half/|X|)
        const std::size_t half = (x_size + 1) / 2;
        std::size_t hits = 0;
        for (const auto& d : lm.labelled_draws)
            hits += std::lower_bound(split.labelled.begin(), split.labelled.end(), d.anchor) - split.labelled.begin() <
                    static_cast<std::ptrdiff_t>(half);
        const double p = static_cast<double>(half) / static_cast<double>(x_size);
        const double mean = static_cast<double>(n) * p;
        const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
        const bool within = std::abs(static_cast<double>(hits) - mean) <= 4.0 * sd + 1e-9;
        ++out.multiplicity.cases;
        out.multiplicity.violations += within ? 0 : 1;
    }
    return out;
}

}  // namespace longremix::testing
