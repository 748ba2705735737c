#include <gtest/gtest.h>

#include "longremix/selector.hpp"
#include "support.hpp"

using namespace longremix;
using longremix::testing::SelectorProperty;

namespace {

Matrix no_guess(std::size_t n) { return Matrix::Zero(static_cast<Index>(n), 2); }

LossHistory history_of(std::initializer_list<std::vector<double>> epochs, std::size_t capacity, double tau = 0.5) {
    LossHistory h(capacity, tau);
    for (const auto& e : epochs) h.push(e);
    return h;
}

}  // namespace

TEST(Baseline, Thresholding) {
    const std::vector<double> p{0.9, 0.4, 0.6};
    const auto s = baseline_split(p, 0.5, no_guess(3));
    EXPECT_EQ(s.labelled, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(s.unlabelled, (std::vector<std::size_t>{1}));
    EXPECT_EQ(s.weights, p);
    EXPECT_EQ(s.kind, SplitKind::baseline);
}

TEST(Baseline, Boundaries) {
    const std::vector<double> p{0.0, 0.5, 1.0};
    EXPECT_EQ(baseline_split(p, 0.0, no_guess(3)).labelled.size(), 3u);
    EXPECT_EQ(baseline_split(p, 0.5, no_guess(3)).labelled, (std::vector<std::size_t>{1, 2}));
    EXPECT_THROW(baseline_split(p, 0.5, no_guess(2)), ShapeError);
}

TEST(Hct, RequiresEveryWindowEpoch) {
    // sample 0 clean in all 5 epochs, sample 1 in 4 of 5
    const auto h = history_of({{0.9, 0.9}, {0.8, 0.2}, {0.7, 0.9}, {0.9, 0.9}, {0.6, 0.9}}, 5);
    const auto s = hct_split(h, 5, 0.5, no_guess(2));
    EXPECT_EQ(s.labelled, (std::vector<std::size_t>{0}));
    EXPECT_EQ(s.unlabelled, (std::vector<std::size_t>{1}));
    EXPECT_EQ(s.weights, (std::vector<double>{0.6, 0.9}));
    EXPECT_EQ(s.kind, SplitKind::hct);
}

TEST(Hct, WindowOfOneIsBaseline) {
    const auto h = history_of({{0.1, 0.9, 0.5}, {0.7, 0.3, 0.5}}, 3);
    EXPECT_EQ(hct_split(h, 1, 0.5, no_guess(3)).labelled, baseline_split(h.posteriors(), 0.5, no_guess(3)).labelled);
}

TEST(Hct, UnderfilledWindowThrows) {
    const auto h = history_of({{0.9}, {0.9}}, 5);
    EXPECT_THROW(hct_split(h, 3, 0.5, no_guess(1)), StateError);
}

TEST(History, KeepsOnlyCapacity) {
    LossHistory h(2, 0.5);
    h.push({0.1});
    h.push({0.2});
    h.push({0.3});
    EXPECT_EQ(h.depth(), 2u);
    EXPECT_EQ(h.epoch(), 3);
    EXPECT_EQ(h.posteriors(0)[0], 0.3);
    EXPECT_EQ(h.posteriors(1)[0], 0.2);
    EXPECT_FALSE(h.verdict(1, 0));
    EXPECT_THROW(h.posteriors(2), StateError);
    EXPECT_THROW(h.push({0.1, 0.2}), ShapeError);
}

TEST(CoreSet, LargestSnapshotLatestTie) {
    std::vector<StageSnapshot> records;
    const std::size_t sizes[] = {100, 150, 140, 150, 130, 120};
    for (int e = 5; e <= 10; ++e) {
        StageSnapshot s{e, {}};
        for (std::size_t i = 0; i < sizes[e - 5]; ++i) s.indices.push_back(i);
        records.push_back(s);
    }
    std::vector<int> labels(200, 4);
    const auto h = select_core_set(records, 10, labels);
    EXPECT_EQ(h.epoch, 8);
    EXPECT_EQ(h.size(), 150u);
    EXPECT_EQ(h.labels, std::vector<int>(150, 4));
}

TEST(CoreSet, IgnoresFirstHalf) {
    const std::vector<StageSnapshot> records{{1, {0, 1, 2, 3}}, {3, {0}}, {4, {1}}};
    const auto h = select_core_set(records, 4, std::vector<int>{0, 1, 2, 3});
    EXPECT_EQ(core_set_first_epoch(4), 2);
    EXPECT_EQ(core_set_first_epoch(5), 3);
    EXPECT_EQ(h.epoch, 4);
    EXPECT_EQ(h.indices, (std::vector<std::size_t>{1}));
    EXPECT_EQ(h.labels, (std::vector<int>{1}));
}

TEST(CoreSet, DegenerateInputs) {
    const std::vector<StageSnapshot> empty_sets{{3, {}}, {4, {}}};
    EXPECT_TRUE(select_core_set(empty_sets, 4, std::vector<int>{0}).empty());
    const std::vector<StageSnapshot> single{{6, {2, 0}}};
    EXPECT_EQ(select_core_set(single, 6, std::vector<int>{5, 6, 7}).indices, (std::vector<std::size_t>{0, 2}));
    const std::vector<StageSnapshot> early{{1, {0}}};
    EXPECT_THROW(select_core_set(early, 6, std::vector<int>{0}), StateError);
}

TEST(Guided, CoreMembersOverride) {
    CoreSet core{{0}, {1}, 7};
    const std::vector<double> p{0.1, 0.7, 0.2};
    const auto s = guided_split(p, 0.5, no_guess(3), core);
    EXPECT_EQ(s.labelled, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(s.unlabelled, (std::vector<std::size_t>{2}));
    EXPECT_EQ(s.weights[0], 1.0);
    EXPECT_EQ(s.weights[1], 0.7);
    EXPECT_EQ(s.kind, SplitKind::guided);
}

TEST(Metrics, CountingOracle) {
    // X = {3 clean, 1 noisy}, U = {1 clean, 2 noisy}
    const std::vector<double> p{1, 1, 1, 1, 0, 0, 0};
    const std::vector<bool> mask{false, false, false, true, false, true, true};
    const auto m = clean_set_metrics(baseline_split(p, 0.5, no_guess(7)), mask);
    EXPECT_DOUBLE_EQ(m.precision, 0.75);
    EXPECT_DOUBLE_EQ(m.recall, 0.75);
    EXPECT_EQ(m.true_positives, 3u);
    EXPECT_EQ(m.false_positives, 1u);
    EXPECT_EQ(m.false_negatives, 1u);
}

TEST(Metrics, Conventions) {
    const std::vector<bool> mask{false, true};
    const auto empty_x = clean_set_metrics(baseline_split(std::vector<double>{0, 0}, 0.5, no_guess(2)), mask);
    EXPECT_EQ(empty_x.precision, 1.0);
    EXPECT_TRUE(empty_x.precision_by_convention);
    EXPECT_EQ(empty_x.recall, 0.0);
    const auto perfect = clean_set_metrics(baseline_split(std::vector<double>{1, 0}, 0.5, no_guess(2)), mask);
    EXPECT_EQ(perfect.precision, 1.0);
    EXPECT_EQ(perfect.recall, 1.0);
    EXPECT_FALSE(perfect.precision_by_convention);
}

TEST(Properties, RandomizedHistories) {
    for (auto prop : {SelectorProperty::partition, SelectorProperty::window_subset, SelectorProperty::zeta_monotone,
                      SelectorProperty::empty_core_reduction, SelectorProperty::core_override}) {
        const auto r = longremix::testing::check_selector_property(prop, 300, 17 + static_cast<int>(prop));
        EXPECT_TRUE(r.ok()) << "property " << static_cast<int>(prop) << ": " << r.violations << " of " << r.cases;
    }
}
