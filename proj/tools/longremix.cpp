// longremix: train, lemma, noise, report and prcurve subcommands.
//
// Exit status: 0 success, 2 configuration error, 3 runtime error.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "longremix/experiment.hpp"

namespace lr = longremix;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct ConfigOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string mode;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
    cmd->add_option("-c,--config", o.config_path, "Experiment config (key = value lines)")->required();
    cmd->add_option("--seed", o.seed, "Master seed; re-derives every component seed");
    cmd->add_option("-o,--output", o.output, "Output directory (overrides LONGREMIX_OUTPUT_DIR and output.dir)");
    cmd->add_option("--mode", o.mode, "Training mode override");
}

lr::ExperimentConfig resolve_config(const ConfigOptions& o) {
    lr::ExperimentConfig cfg = lr::load_config(o.config_path);
    if (o.seed) cfg.reseed(*o.seed);
    if (!o.mode.empty()) lr::set_config_value(cfg, "train.mode", o.mode);
    if (const char* env = std::getenv("LONGREMIX_OUTPUT_DIR"); env && *env) cfg.output.dir = env;
    if (!o.output.empty()) cfg.output.dir = o.output;
    cfg.validate();
    return cfg;
}

void print_summary(const lr::ExperimentResult& r, const std::string& dir) {
    const auto& fin = r.training.final_record();
    std::cout << "mode " << lr::to_string(r.training.mode) << "  best_acc " << std::setprecision(4) << std::fixed
              << fin.best_accuracy();
    if (const auto l = fin.last10_accuracy()) std::cout << "  last10_acc " << *l;
    std::cout << '\n';
    for (const auto& s : r.training.stages)
        if (s.core_set)
            std::cout << "core set: " << s.core_set->size << " samples from epoch " << s.core_set->epoch
                      << ", precision " << s.core_set->clean.precision << '\n';
    std::cout << "wrote " << dir << '\n';
}

int cmd_train(const ConfigOptions& o) {
    const auto cfg = resolve_config(o);
    lr::ExperimentResult r;
    lr::run_experiment(cfg, cfg.output.dir, &r);
    print_summary(r, cfg.output.dir);
    return 0;
}

int cmd_prcurve(const ConfigOptions& o) {
    auto cfg = resolve_config(o);
    if (!lr::has_stage1(cfg.train.mode)) cfg.train.mode = lr::TrainMode::retrain_only;
    const auto data = lr::prepare_data(cfg);
    const auto stage1 = lr::run_stage1_hct(cfg.train, data.train, data.test);
    const auto curve = lr::pr_curve(stage1.final_histories, data.train.noise_mask, lr::tau_grid(cfg.output.tau_steps),
                                    static_cast<std::size_t>(cfg.train.zeta));
    std::filesystem::create_directories(cfg.output.dir);
    const auto path = std::filesystem::path(cfg.output.dir) / "prcurve.csv";
    std::ofstream os(path);
    if (!os) throw lr::Error("cannot write '" + path.string() + "'");
    lr::write_curve_csv(curve, os);
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

struct LemmaOptions {
    double p_cc = 0.8, p_nn = 0.7, p_c = 0.5;
    int zeta_min = 1, zeta_max = 10;
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_lemma(const LemmaOptions& o) {
    lr::SelectionParams p;
    p.p_cc = o.p_cc;
    p.p_nn = o.p_nn;
    p.p_c = o.p_c;
    const auto rows = lr::sweep_zeta(p, o.zeta_min, o.zeta_max, o.trials, o.seed);
    if (o.out.empty()) {
        lr::write_sweep_csv(rows, std::cout);
    } else {
        std::ofstream os(o.out);
        if (!os) throw lr::Error("cannot write '" + o.out + "'");
        lr::write_sweep_csv(rows, os);
    }
    return 0;
}

struct NoiseOptions {
    std::string input, output, kind = "symmetric", mapping;
    double rate = 0.0;
    std::uint64_t seed = 1;
};

int cmd_noise(const NoiseOptions& o) {
    lr::ExperimentConfig scratch;
    lr::set_config_value(scratch, "noise.kind", o.kind);
    lr::set_config_value(scratch, "noise.mapping", o.mapping);
    lr::NoiseSpec spec = scratch.noise;
    spec.rate = o.rate;
    spec.seed = o.seed;
    auto ds = lr::inject_noise(lr::load_csv_dataset(o.input), spec);
    std::ofstream os(o.output);
    if (!os) throw lr::Error("cannot write '" + o.output + "'");
    lr::write_csv_dataset(ds, os);
    std::ofstream side(o.output + ".noise.json");
    if (!side) throw lr::Error("cannot write '" + o.output + ".noise.json'");
    side << lr::noise_sidecar(spec, ds.noisy_count()).dump(2) << '\n';
    std::cout << "flipped " << ds.noisy_count() << " of " << ds.size() << " labels\n";
    return 0;
}

struct ReportOptions {
    std::string metrics;
    std::optional<std::uint64_t> seed;
};

int cmd_report(const ReportOptions& o) {
    std::ifstream in(o.metrics);
    if (!in) throw lr::ConfigError("cannot open metrics file '" + o.metrics + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw lr::ParseError(std::string("metrics file: ") + e.what());
    }
    if (doc.value("schema_version", 0) != lr::kMetricsSchemaVersion)
        throw lr::ParseError("metrics file has an unsupported schema_version");
    const std::string recorded = doc["config"].value("seed", "");
    if (o.seed && std::to_string(*o.seed) != recorded)
        throw lr::ConfigError("--seed " + std::to_string(*o.seed) + " does not match the recorded seed " + recorded);
    std::cout << "seed " << recorded << "  mode " << doc["summary"]["mode"].get<std::string>() << '\n';
    std::cout << std::left << std::setw(16) << "stage" << std::setw(8) << "epochs" << std::setw(10) << "best_acc"
              << "last10_acc\n";
    for (const auto& s : doc["stages"]) {
        std::cout << std::setw(16) << s["stage"].get<std::string>() << std::setw(8) << s["epochs"].size()
                  << std::setw(10) << std::setprecision(4) << std::fixed << s["best_acc"].get<double>();
        if (s["last10_acc"].is_null()) std::cout << "-";
        else std::cout << s["last10_acc"].get<double>();
        std::cout << '\n';
    }
    if (!doc["core_set"].is_null())
        std::cout << "core set  size " << doc["core_set"]["size"] << "  epoch " << doc["core_set"]["epoch"]
                  << "  precision " << doc["core_set"]["clean"]["precision"].get<double>() << '\n';
    for (const auto& w : doc["warnings"]) std::cout << "warning: " << w.get<std::string>() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy-label training with high-confidence selection and LongMix"};
    app.require_subcommand(1);

    ConfigOptions train_opts, curve_opts;
    auto* train = app.add_subcommand("train", "Run an experiment config and write the report bundle");
    add_config_options(train, train_opts);

    auto* curve = app.add_subcommand("prcurve", "Run stage 1 of a config and write the precision/recall curve");
    add_config_options(curve, curve_opts);

    LemmaOptions lemma_opts;
    auto* lemma = app.add_subcommand("lemma", "Closed-form and Monte-Carlo precision/recall over a zeta range");
    lemma->add_option("--p-cc", lemma_opts.p_cc, "Probability a clean sample is classified clean");
    lemma->add_option("--p-nn", lemma_opts.p_nn, "Probability a noisy sample is classified noisy");
    lemma->add_option("--p-c", lemma_opts.p_c, "Proportion of clean samples");
    lemma->add_option("--zeta-min", lemma_opts.zeta_min);
    lemma->add_option("--zeta-max", lemma_opts.zeta_max);
    lemma->add_option("--trials", lemma_opts.trials, "Monte-Carlo samples per zeta (0 disables)");
    lemma->add_option("--seed", lemma_opts.seed);
    lemma->add_option("-o,--output", lemma_opts.out, "CSV path (default stdout)");

    NoiseOptions noise_opts;
    auto* noise = app.add_subcommand("noise", "Inject label noise into a CSV dataset");
    noise->add_option("-i,--input", noise_opts.input)->required();
    noise->add_option("-o,--output", noise_opts.output)->required();
    noise->add_option("--kind", noise_opts.kind)->check(CLI::IsMember({"symmetric", "asymmetric"}));
    noise->add_option("--rate", noise_opts.rate)->required();
    noise->add_option("--mapping", noise_opts.mapping, "Asymmetric mapping, e.g. 0:1,1:0");
    noise->add_option("--seed", noise_opts.seed);

    ReportOptions report_opts;
    auto* report = app.add_subcommand("report", "Summarize a metrics.json written by train");
    report->add_option("metrics", report_opts.metrics)->required();
    report->add_option("--seed", report_opts.seed, "Fail unless the run used this master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_opts);
        if (*curve) return cmd_prcurve(curve_opts);
        if (*lemma) return cmd_lemma(lemma_opts);
        if (*noise) return cmd_noise(noise_opts);
        if (*report) return cmd_report(report_opts);
    } catch (const lr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
