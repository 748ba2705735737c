#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "longremix/experiment.hpp"

using namespace longremix;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# tiny run
seed = 7
dataset.kind = blobs
dataset.size = 200
dataset.test_size = 100
dataset.classes = 4
dataset.spread = 0.08
noise.kind = symmetric
noise.rate = 0.5
train.mode = full-longremix
train.epochs = 4
train.warmup_epochs = 2
train.zeta = 2
train.hidden = 12
train.alpha = 0.2   # small mixing
output.tau_steps = 4
)";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("longremix_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
    const auto c = parse_config(kSmall);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.dataset.size, 200u);
    EXPECT_EQ(c.train.mode, TrainMode::full_longremix);
    EXPECT_EQ(c.train.hidden, std::vector<int>{12});
    EXPECT_DOUBLE_EQ(c.train.alpha, 0.2);
    EXPECT_EQ(c.train.model_seed1, derive_seed(7, 4));
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config("train.learnign_rate = 0.1\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.learnign_rate"), std::string::npos);
    }
}

TEST(Config, BadValuesAreNamed) {
    for (const char* text : {"train.zeta = many\n", "train.normalize_losses = yes\n", "noise.mapping = 0-1\n",
                             "dataset.kind = mnist\n"}) {
        EXPECT_THROW(parse_config(text), ConfigError) << text;
    }
    EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("just a line\n"), ConfigError);
    EXPECT_THROW(parse_config("noise.kind = asymmetric\nnoise.rate = 0.5\nnoise.mapping = 0:1\n"), ConfigError);
}

TEST(Config, ExplicitSeedsWinOverDerived) {
    const auto c = parse_config("train.plan_seed = 99\nseed = 3\n");
    EXPECT_EQ(c.train.plan_seed, 99u);
    EXPECT_EQ(c.train.model_seed2, derive_seed(3, 5));
}

TEST(Config, RoundTrip) {
    auto c = parse_config(kSmall);
    c.noise.kind = NoiseKind::asymmetric;
    c.noise.rate = 0.4;
    c.noise.mapping = {{0, 1}, {1, 0}};
    c.train.hidden = {8, 6};
    c.train.learning_rate = 0.1 + 0.2;
    const auto text = format_config(c);
    const auto back = parse_config(text);
    EXPECT_EQ(format_config(back), text);
    EXPECT_EQ(back.train.learning_rate, c.train.learning_rate);
    EXPECT_EQ(back.noise.mapping, c.noise.mapping);
}

TEST(Curve, Boundaries) {
    LossHistory h(2, 0.5);
    h.push({0.9, 0.2, 1.0, 0.6});
    h.push({0.8, 0.7, 1.0, 0.4});
    const std::vector<bool> mask{false, true, false, false};
    const std::array<LossHistory, 1> hs{h};
    const std::vector<double> taus{0.0, 0.5, 1.0};
    const auto curve = pr_curve(hs, mask, taus, 2);
    ASSERT_EQ(curve.size(), 3u);
    EXPECT_EQ(curve[0].baseline.recall, 1.0);
    EXPECT_EQ(curve[0].baseline_size, 4u);
    // tau = 0.5: baseline X = {0, 1, 2}, HCT X = {0, 2}
    EXPECT_EQ(curve[1].baseline_size, 3u);
    EXPECT_EQ(curve[1].hct_size, 2u);
    EXPECT_DOUBLE_EQ(curve[1].baseline.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(curve[1].hct.precision, 1.0);
    EXPECT_LE(curve[1].hct.recall, curve[1].baseline.recall);
    EXPECT_EQ(curve[2].baseline_size, 0u);
    EXPECT_TRUE(curve[2].baseline.precision_by_convention);
    EXPECT_EQ(tau_grid(4), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Experiment, BundleContents) {
    const auto dir = temp_dir("bundle");
    ExperimentResult r;
    const auto files = run_experiment(parse_config(kSmall), dir.string(), &r);
    for (const auto& f : files) {
        ASSERT_TRUE(fs::exists(dir / f)) << f;
        EXPECT_GT(fs::file_size(dir / f), 0u) << f;
    }
    EXPECT_EQ(files.back(), "manifest.json");
    for (const char* f : {"metrics.json", "epochs.csv", "prcurve.csv", "noise.json", "config.txt"})
        EXPECT_NE(std::find(files.begin(), files.end(), f), files.end()) << f;

    const auto doc = nlohmann::ordered_json::parse(slurp(dir / "metrics.json"));
    EXPECT_EQ(doc["schema_version"], kMetricsSchemaVersion);
    EXPECT_TRUE(doc["summary"].contains("best_acc"));
    EXPECT_TRUE(doc["summary"].contains("last10_acc"));
    EXPECT_EQ(doc["stages"].size(), 2u);
    EXPECT_FALSE(doc["core_set"].is_null());

    // the echoed config is exactly the re-serialized effective config
    std::string echoed;
    for (const auto& [k, v] : doc["config"].items()) echoed += k + " = " + v.get<std::string>() + "\n";
    EXPECT_EQ(echoed, format_config(r.config));
    EXPECT_EQ(slurp(dir / "config.txt"), echoed);

    std::istringstream csv(slurp(dir / "epochs.csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(csv, line);
    while (std::getline(csv, line)) ++rows;
    std::size_t epochs = 0;
    for (const auto& s : r.training.stages) epochs += s.epochs.size();
    EXPECT_EQ(rows, epochs);
    fs::remove_all(dir);
}

TEST(Experiment, MetricsAreByteIdenticalAcrossRuns) {
    const auto a = temp_dir("det_a"), b = temp_dir("det_b");
    auto cfg = parse_config(kSmall);
    cfg.output.gmm_trace = true;
    cfg.output.plan_digest = true;
    run_experiment(cfg, a.string());
    run_experiment(cfg, b.string());
    for (const char* f : {"metrics.json", "epochs.csv", "prcurve.csv", "gmm.jsonl", "plans.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, CsvDatasetWithoutTestFile) {
    const auto dir = temp_dir("csv");
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "train.csv");
        write_csv_dataset(make_synthetic_dataset(SyntheticKind::blobs, 120, 3, 0.1, 4), os);
    }
    auto cfg = parse_config("dataset.kind = csv\ndataset.path = " + (dir / "train.csv").string() +
                            "\ntrain.mode = baseline\ntrain.epochs = 3\ntrain.warmup_epochs = 1\ntrain.zeta = 1\n"
                            "noise.rate = 0.2\ntrain.hidden = 8\n");
    ExperimentResult r;
    run_experiment(cfg, (dir / "out").string(), &r);
    EXPECT_TRUE(r.test_is_train);
    const auto doc = nlohmann::ordered_json::parse(slurp(dir / "out" / "metrics.json"));
    EXPECT_EQ(doc["evaluation"], "training-features-true-labels");
    fs::remove_all(dir);
}

TEST(Experiment, RuntimeFailureLeavesMarker) {
    const auto dir = temp_dir("fail");
    auto cfg = parse_config("dataset.kind = csv\ndataset.path = /nonexistent/train.csv\n");
    EXPECT_THROW(run_experiment(cfg, dir.string()), Error);
    EXPECT_TRUE(fs::exists(dir / "FAILED"));
    fs::remove_all(dir);
}
