#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "longremix/gmm.hpp"

using namespace longremix;

namespace {

std::vector<double> two_clusters(std::size_t n0, double m0, double s0, std::size_t n1, double m1, double s1,
                                 std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> a(m0, s0), b(m1, s1);
    std::vector<double> v;
    for (std::size_t i = 0; i < n0; ++i) v.push_back(a(rng));
    for (std::size_t i = 0; i < n1; ++i) v.push_back(b(rng));
    return v;
}

double density(double x, double m, double var) {
    return std::exp(-(x - m) * (x - m) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST(Losses, PerfectAndUniformNetworks) {
    NoisyDataset ds = make_synthetic_dataset(SyntheticKind::blobs, 20, 10, 0.1, 1);
    auto net = make_network({2, 10}, 1, 1);
    net.layers[0].weights.setZero();
    for (double l : per_sample_losses(net, ds).values) EXPECT_NEAR(l, std::log(10.0), 1e-12);

    // a net whose bias makes class 3 certain; label everything 3
    net.layers[0].bias.setConstant(-800.0);
    net.layers[0].bias[3] = 800.0;
    std::fill(ds.labels.begin(), ds.labels.end(), 3);
    for (double l : per_sample_losses(net, ds).values) EXPECT_EQ(l, 0.0);
}

TEST(Losses, SpotCheckAgainstForward) {
    const auto ds = make_synthetic_dataset(SyntheticKind::blobs, 30, 3, 0.3, 2);
    const auto net = make_network({2, 8, 3}, 1, 4);
    const auto lv = per_sample_losses(net, ds, 7);
    EXPECT_EQ(lv.epoch, 7);
    for (std::size_t i : {0u, 11u, 29u})
        EXPECT_DOUBLE_EQ(lv.values[i], cross_entropy(forward(net, ds.features.row(static_cast<Index>(i)).transpose()),
                                                     ds.labels[i]));
}

TEST(Normalize, MinMax) {
    LossVector lv{{0.0, 5.0, 10.0}, 1};
    EXPECT_EQ(normalize_losses(lv).values, (std::vector<double>{0.0, 0.5, 1.0}));
    LossVector flat{{3.0, 3.0, 3.0}, 1};
    EXPECT_EQ(normalize_losses(flat).values, (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_THROW(normalize_losses(LossVector{}), ShapeError);
}

TEST(Em, RecoversWellSeparatedMixture) {
    const auto v = two_clusters(500, 0.1, 0.01, 500, 0.9, 0.01, 1);
    const auto fit = fit_gmm_em(v);
    const auto& g = fit.params;
    const int c = g.clean_component;
    EXPECT_NEAR(g.means[c], 0.1, 0.01);
    EXPECT_NEAR(g.means[1 - c], 0.9, 0.01);
    EXPECT_NEAR(g.weights[c], 0.5, 0.05);
    EXPECT_NEAR(g.weights[0] + g.weights[1], 1.0, 1e-9);
    EXPECT_TRUE(fit.converged);
}

TEST(Em, LogLikelihoodNeverDecreases) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto v = two_clusters(300 + 20 * s, 0.2, 0.1, 200, 0.6, 0.2, s);
        const auto fit = fit_gmm_em(v);
        for (std::size_t k = 1; k < fit.log_likelihoods.size(); ++k)
            EXPECT_GE(fit.log_likelihoods[k], fit.log_likelihoods[k - 1] - 1e-12) << "seed " << s << " iter " << k;
    }
}

TEST(Em, VarianceFloorAndCollapse) {
    std::vector<double> v(50, 0.0);
    for (std::size_t i = 25; i < 50; ++i) v[i] = 1.0;
    const auto fit = fit_gmm_em(v);
    EXPECT_GE(fit.params.variances[0], 1e-6);
    EXPECT_GE(fit.params.variances[1], 1e-6);
    const auto flat = fit_gmm_em(std::vector<double>(10, 0.3));
    EXPECT_TRUE(flat.params.collapsed);
    EXPECT_EQ(clean_posterior(flat.params, 0.3), 0.5);
    EXPECT_THROW(fit_gmm_em(std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Em, SmallerMeanIsClean) {
    auto v = two_clusters(100, 0.8, 0.05, 400, 0.2, 0.05, 3);
    const auto g = fit_gmm_em(v).params;
    EXPECT_LT(g.means[g.clean_component], g.means[1 - g.clean_component]);
}

TEST(Em, Deterministic) {
    const auto v = two_clusters(300, 0.2, 0.1, 300, 0.7, 0.1, 4);
    const auto a = fit_gmm_em(v), b = fit_gmm_em(v);
    EXPECT_EQ(a.params.means, b.params.means);
    EXPECT_EQ(a.params.variances, b.params.variances);
    EXPECT_EQ(a.log_likelihoods, b.log_likelihoods);
}

TEST(Posterior, SymmetricMidpointAndTail) {
    GmmParams g;
    g.means = {0.1, 0.9};
    g.variances = {0.01, 0.01};
    EXPECT_NEAR(clean_posterior(g, 0.5), 0.5, 1e-12);
    EXPECT_GT(clean_posterior(g, 0.1), 0.999);
}

TEST(Posterior, MatchesIndependentDensityEvaluation) {
    GmmParams g;
    g.weights = {0.3, 0.7};
    g.means = {0.7, 0.2};
    g.variances = {0.02, 0.05};
    g.clean_component = 1;
    for (double x = 0.0; x <= 1.0; x += 0.05) {
        const double a = g.weights[0] * density(x, g.means[0], g.variances[0]);
        const double b = g.weights[1] * density(x, g.means[1], g.variances[1]);
        EXPECT_NEAR(clean_posterior(g, x), b / (a + b), 1e-12);
    }
}

TEST(Posterior, MonotoneWithEqualVariances) {
    GmmParams g;
    g.weights = {0.4, 0.6};
    g.means = {0.2, 0.6};
    g.variances = {0.03, 0.03};
    double prev = 2.0;
    for (double x = -0.5; x <= 1.5; x += 0.01) {
        const double p = clean_posterior(g, x);
        EXPECT_LE(p, prev);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        prev = p;
    }
}
