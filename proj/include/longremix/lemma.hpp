#pragma once

// Precision/recall of a clean set that requires a sample to be classified
// clean in zeta consecutive, independent rounds: closed form and Monte-Carlo.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <vector>

#include "longremix/error.hpp"
#include "longremix/rng.hpp"

namespace longremix {

struct SelectionParams {
    double p_cc = 0.8;  // clean sample classified clean
    double p_nn = 0.7;  // noisy sample classified noisy
    double p_c = 0.5;   // proportion of clean samples
    int zeta = 1;

    double p_cn() const { return 1.0 - p_nn; }
    double p_n() const { return 1.0 - p_c; }

    void validate(bool allow_closed_bounds = true) const {
        auto in_range = [&](double v) { return allow_closed_bounds ? (v >= 0.0 && v <= 1.0) : (v > 0.0 && v < 1.0); };
        if (!in_range(p_cc) || !in_range(p_nn)) throw ConfigError("P_cc and P_nn must be probabilities");
        if (!(p_c > 0.0 && p_c < 1.0)) throw ConfigError("P_c must lie in (0, 1)");
        if (zeta < 1) throw ConfigError("zeta must be at least 1");
    }
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

inline PrecisionRecall closed_form_pr(const SelectionParams& p) {
    p.validate();
    const double keep_clean = std::pow(p.p_cc, p.zeta);
    const double keep_noisy = std::pow(p.p_cn(), p.zeta);
    const double tp = keep_clean * p.p_c;
    const double fp = keep_noisy * p.p_n();
    const double fn = (1.0 - keep_clean) * p.p_c;
    return {tp + fp > 0.0 ? tp / (tp + fp) : 1.0, tp / (tp + fn)};
}

struct MonteCarloPr {
    double precision = 0.0;
    double recall = 0.0;
    double se_precision = 0.0;
    double se_recall = 0.0;
    std::uint64_t selected = 0;  // samples that survived every round
    std::uint64_t clean = 0;
    bool undefined = false;      // nothing selected: precision has no estimate
};

/// Simulates `trials` samples; each is clean with probability P_c and is kept
/// only if it is classified clean in all zeta rounds.
inline MonteCarloPr monte_carlo_pr(const SelectionParams& p, std::uint64_t trials, std::uint64_t seed) {
    p.validate();
    if (trials == 0) throw ConfigError("monte_carlo_pr needs at least one trial");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uint64_t tp = 0, fp = 0, clean = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const bool is_clean = u(rng) < p.p_c;
        const double keep = is_clean ? p.p_cc : p.p_cn();
        bool kept = true;
        for (int r = 0; r < p.zeta && kept; ++r) kept = u(rng) < keep;
        clean += is_clean;
        if (kept) (is_clean ? tp : fp)++;
    }
    MonteCarloPr out;
    out.selected = tp + fp;
    out.clean = clean;
    if (out.selected == 0) {
        out.undefined = true;
    } else {
        out.precision = static_cast<double>(tp) / static_cast<double>(out.selected);
        out.se_precision = std::sqrt(out.precision * (1.0 - out.precision) / static_cast<double>(out.selected));
    }
    if (clean > 0) {
        out.recall = static_cast<double>(tp) / static_cast<double>(clean);
        out.se_recall = std::sqrt(out.recall * (1.0 - out.recall) / static_cast<double>(clean));
    }
    return out;
}

struct SweepRow {
    int zeta = 1;
    PrecisionRecall closed_form;
    bool precision_increased = false;  // vs the previous row
    bool recall_decreased = false;
    bool has_monte_carlo = false;
    MonteCarloPr monte_carlo;
};

/// Closed-form rows for zeta in [zeta_min, zeta_max]; optional Monte-Carlo
/// columns when `trials` > 0. The first row's monotonicity flags are true.
inline std::vector<SweepRow> sweep_zeta(SelectionParams base, int zeta_min, int zeta_max, std::uint64_t trials = 0,
                                        std::uint64_t seed = 0) {
    if (zeta_min < 1 || zeta_max < zeta_min) throw ConfigError("zeta range must be non-empty and start at 1 or more");
    std::vector<SweepRow> rows;
    for (int z = zeta_min; z <= zeta_max; ++z) {
        base.zeta = z;
        SweepRow row;
        row.zeta = z;
        row.closed_form = closed_form_pr(base);
        if (rows.empty()) {
            row.precision_increased = row.recall_decreased = true;
        } else {
            row.precision_increased = row.closed_form.precision > rows.back().closed_form.precision;
            row.recall_decreased = row.closed_form.recall < rows.back().closed_form.recall;
        }
        if (trials > 0) {
            row.has_monte_carlo = true;
            row.monte_carlo = monte_carlo_pr(base, trials, derive_seed(seed, static_cast<std::uint64_t>(z)));
        }
        rows.push_back(row);
    }
    return rows;
}

/// CSV columns: zeta, precision_cf, recall_cf, precision_mc, recall_mc, se_p, se_r.
/// Monte-Carlo columns are empty when not simulated.
inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& os) {
    os << "zeta,precision_cf,recall_cf,precision_mc,recall_mc,se_p,se_r\n";
    os << std::setprecision(6);
    for (const auto& r : rows) {
        os << r.zeta << ',' << r.closed_form.precision << ',' << r.closed_form.recall << ',';
        if (r.has_monte_carlo && !r.monte_carlo.undefined)
            os << r.monte_carlo.precision << ',' << r.monte_carlo.recall << ',' << r.monte_carlo.se_precision << ','
               << r.monte_carlo.se_recall;
        else if (r.has_monte_carlo)
            os << ',' << r.monte_carlo.recall << ",," << r.monte_carlo.se_recall;
        else
            os << ",,,";
        os << '\n';
    }
}

}  // namespace longremix
