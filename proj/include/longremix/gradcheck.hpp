#pragma once

// Central finite-difference check of backward() against batch_loss().

#include <algorithm>
#include <cmath>

#include "longremix/nn.hpp"

namespace longremix {

struct GradCheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t parameters = 0;
};

/// Relative error per parameter is |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult check_gradients(const Network& net, const Batch& batch, const LossSpec& spec,
                                       double step = 1e-5, double floor = 1e-8) {
    const LossGradient g = backward(net, batch, spec);
    GradCheckResult r;
    Network probe = net;
    auto visit = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + step;
        const double up = batch_loss(probe, batch, spec);
        param = saved - step;
        const double down = batch_loss(probe, batch, spec);
        param = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double abs_err = std::abs(analytic - numeric);
        r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
        r.max_relative_error =
            std::max(r.max_relative_error, abs_err / std::max({std::abs(analytic), std::abs(numeric), floor}));
        ++r.parameters;
    };
    for (std::size_t k = 0; k < probe.layers.size(); ++k) {
        auto& w = probe.layers[k].weights;
        for (Index i = 0; i < w.size(); ++i) visit(w.data()[i], g.grads.weights[k].data()[i]);
        auto& b = probe.layers[k].bias;
        for (Index i = 0; i < b.size(); ++i) visit(b[i], g.grads.biases[k][i]);
    }
    return r;
}

}  // namespace longremix
