#pragma once

// Per-sample losses and the two-component 1-D Gaussian mixture used to score
// how likely each sample is to be clean.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "longremix/data.hpp"
#include "longremix/error.hpp"
#include "longremix/nn.hpp"

namespace longremix {

struct LossVector {
    std::vector<double> values;
    int epoch = 0;
};

/// Unreduced cross-entropy of every sample against its observed label.
inline LossVector per_sample_losses(const Network& net, const NoisyDataset& ds, int epoch = 0) {
    if (net.input_width() != ds.dim()) throw ShapeError("per_sample_losses: network input width != feature count");
    if (net.output_width() != ds.num_classes) throw ShapeError("per_sample_losses: network classes != dataset classes");
    const Matrix p = forward_batch(net, ds.features);
    LossVector out;
    out.epoch = epoch;
    out.values.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        out.values[i] = -std::log(std::max(p(static_cast<Index>(i), ds.labels[i]), kLogClamp));
    return out;
}

/// Min-max rescale to [0, 1]. A constant vector maps to all 0.5.
inline LossVector normalize_losses(LossVector lv) {
    if (lv.values.empty()) throw ShapeError("normalize_losses: empty loss vector");
    const auto [lo, hi] = std::minmax_element(lv.values.begin(), lv.values.end());
    const double min = *lo, range = *hi - *lo;
    for (double& v : lv.values) v = range > 0.0 ? (v - min) / range : 0.5;
    return lv;
}

/// Two-component mixture. `clean_component` indexes the smaller-mean
/// component. A collapsed fit (all inputs identical) gives every sample a
/// clean posterior of 0.5.
struct GmmParams {
    std::array<double, 2> weights{0.5, 0.5};
    std::array<double, 2> means{0.0, 0.0};
    std::array<double, 2> variances{1.0, 1.0};
    int clean_component = 0;
    bool collapsed = false;
};

struct EmOptions {
    double tol = 1e-6;  // on mean log-likelihood
    int max_iter = 100;
    double variance_floor = 1e-6;
};

struct GmmFit {
    GmmParams params;
    std::vector<double> log_likelihoods;  // mean log-likelihood of each visited parameter state
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double log_normal(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Component log-joint densities at x.
inline std::array<double, 2> log_joint(const GmmParams& g, double x) {
    return {std::log(g.weights[0]) + log_normal(x, g.means[0], g.variances[0]),
            std::log(g.weights[1]) + log_normal(x, g.means[1], g.variances[1])};
}

inline double log_sum_exp(const std::array<double, 2>& a) {
    const double m = std::max(a[0], a[1]);
    return m + std::log(std::exp(a[0] - m) + std::exp(a[1] - m));
}

}  // namespace detail

/// EM for a two-component 1-D Gaussian mixture. Means start at the 10th and
/// 90th percentiles, weights at 0.5, both variances at the sample variance.
/// The variance floor is applied in every M-step.
inline GmmFit fit_gmm_em(std::span<const double> losses, const EmOptions& opt = {}) {
    if (losses.size() < 4) throw ShapeError("fit_gmm_em: need at least 4 samples");
    const std::size_t n = losses.size();
    const double nd = static_cast<double>(n);

    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());

    GmmFit fit;
    if (sorted.front() == sorted.back()) {
        fit.params.means = {sorted.front(), sorted.front()};
        fit.params.variances = {opt.variance_floor, opt.variance_floor};
        fit.params.collapsed = true;
        fit.converged = true;
        return fit;
    }

    double mean = 0.0;
    for (double v : losses) mean += v;
    mean /= nd;
    double var = 0.0;
    for (double v : losses) var += (v - mean) * (v - mean);
    var = std::max(var / nd, opt.variance_floor);

    GmmParams g;
    g.means = {detail::quantile_sorted(sorted, 0.1), detail::quantile_sorted(sorted, 0.9)};
    if (g.means[0] == g.means[1]) g.means = {sorted.front(), sorted.back()};
    g.variances = {var, var};

    std::vector<double> resp(n);  // responsibility of component 0
    for (int iter = 0;; ++iter) {
        // E-step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto lj = detail::log_joint(g, losses[i]);
            const double lse = detail::log_sum_exp(lj);
            ll += lse;
            resp[i] = std::exp(lj[0] - lse);
        }
        ll /= nd;
        fit.log_likelihoods.push_back(ll);
        fit.params = g;
        fit.iterations = iter;
        if (iter > 0 && ll - fit.log_likelihoods[fit.log_likelihoods.size() - 2] < opt.tol) {
            fit.converged = true;
            break;
        }
        if (iter >= opt.max_iter) break;

        // M-step
        std::array<double, 2> nk{0.0, 0.0}, sx{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            nk[0] += resp[i];
            nk[1] += 1.0 - resp[i];
            sx[0] += resp[i] * losses[i];
            sx[1] += (1.0 - resp[i]) * losses[i];
        }
        GmmParams next = g;
        for (int k = 0; k < 2; ++k) {
            if (nk[k] <= 0.0) continue;  // empty component keeps its parameters
            next.means[k] = sx[k] / nk[k];
        }
        std::array<double, 2> sq{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const double d0 = losses[i] - next.means[0];
            const double d1 = losses[i] - next.means[1];
            sq[0] += resp[i] * d0 * d0;
            sq[1] += (1.0 - resp[i]) * d1 * d1;
        }
        for (int k = 0; k < 2; ++k) {
            next.weights[k] = std::clamp(nk[k] / nd, 1e-12, 1.0 - 1e-12);
            if (nk[k] > 0.0) next.variances[k] = std::max(sq[k] / nk[k], opt.variance_floor);
        }
        next.weights[1] = 1.0 - next.weights[0];
        g = next;
    }
    fit.params.clean_component = fit.params.means[1] < fit.params.means[0] ? 1 : 0;
    return fit;
}

/// Posterior responsibility of the smaller-mean component at `loss`.
inline double clean_posterior(const GmmParams& g, double loss) {
    if (g.collapsed) return 0.5;
    const auto lj = detail::log_joint(g, loss);
    const double lse = detail::log_sum_exp(lj);
    return std::clamp(std::exp(lj[g.clean_component] - lse), 0.0, 1.0);
}

inline std::vector<double> clean_posteriors(const GmmParams& g, std::span<const double> losses) {
    std::vector<double> out(losses.size());
    for (std::size_t i = 0; i < losses.size(); ++i) out[i] = clean_posterior(g, losses[i]);
    return out;
}

}  // namespace longremix
