#pragma once

// Small dense classifier with hand-written gradients and a momentum SGD
// optimizer. Samples are stored one per row.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "longremix/error.hpp"
#include "longremix/rng.hpp"

namespace longremix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Probabilities below this are clamped before taking a log.
inline constexpr double kLogClamp = 1e-12;

enum class Activation { relu, softmax };

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::relu;
};

/// Feed-forward classifier: ReLU hidden layers followed by a softmax output.
/// `tag` identifies which of the two co-trained models this is.
struct Network {
    std::vector<DenseLayer> layers;
    int tag = 1;

    Index input_width() const { return layers.front().weights.cols(); }
    Index output_width() const { return layers.back().weights.rows(); }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }
};

/// Same layout as a Network's parameters. Holds gradients and momentum buffers.
struct ParameterSet {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static ParameterSet zeros_like(const Network& net) {
        ParameterSet p;
        for (const auto& l : net.layers) {
            p.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
            p.biases.push_back(Vector::Zero(l.bias.size()));
        }
        return p;
    }

    bool same_shape(const Network& net) const {
        if (weights.size() != net.layers.size() || biases.size() != net.layers.size()) return false;
        for (std::size_t k = 0; k < net.layers.size(); ++k) {
            if (weights[k].rows() != net.layers[k].weights.rows() ||
                weights[k].cols() != net.layers[k].weights.cols() ||
                biases[k].size() != net.layers[k].bias.size())
                return false;
        }
        return true;
    }
};

inline void validate(const Network& net) {
    if (net.layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& l = net.layers[k];
        if (l.bias.size() != l.weights.rows())
            throw ShapeError("layer " + std::to_string(k) + ": bias width does not match weight rows");
        if (k + 1 < net.layers.size()) {
            if (l.activation != Activation::relu)
                throw ShapeError("layer " + std::to_string(k) + ": hidden layers must use relu");
            if (net.layers[k + 1].weights.cols() != l.weights.rows())
                throw ShapeError("layer " + std::to_string(k) + " output width does not match layer " +
                                 std::to_string(k + 1) + " input width");
        } else if (l.activation != Activation::softmax) {
            throw ShapeError("output layer must use softmax");
        }
    }
}

/// Builds a network with layer widths `widths` = {input, hidden..., classes}.
/// Weights are Glorot-uniform, biases zero.
inline Network make_network(std::span<const int> widths, int tag, std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("network needs at least an input and an output width");
    for (int w : widths)
        if (w <= 0) throw ConfigError("layer widths must be positive");
    Rng rng(seed);
    Network net;
    net.tag = tag;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const int fan_in = widths[k];
        const int fan_out = widths[k + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer;
        layer.weights.resize(fan_out, fan_in);
        for (Index r = 0; r < fan_out; ++r)
            for (Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
        layer.bias = Vector::Zero(fan_out);
        layer.activation = (k + 2 == widths.size()) ? Activation::softmax : Activation::relu;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline Network make_network(std::initializer_list<int> widths, int tag, std::uint64_t seed) {
    return make_network(std::span<const int>(widths.begin(), widths.size()), tag, seed);
}

namespace detail {

inline void softmax_rows(Matrix& z) {
    for (Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - m).exp();
        z.row(r) /= z.row(r).sum();
    }
}

// activations[0] is the input, activations[k + 1] the output of layer k.
inline std::vector<Matrix> forward_cached(const Network& net, const Matrix& x) {
    if (x.cols() != net.input_width())
        throw ShapeError("input has " + std::to_string(x.cols()) + " features, network expects " +
                         std::to_string(net.input_width()));
    std::vector<Matrix> acts;
    acts.reserve(net.layers.size() + 1);
    acts.push_back(x);
    for (const auto& l : net.layers) {
        Matrix z = acts.back() * l.weights.transpose();
        z.rowwise() += l.bias.transpose();
        if (l.activation == Activation::relu)
            z = z.cwiseMax(0.0);
        else
            softmax_rows(z);
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace detail

/// Class probabilities for every row of `x`.
inline Matrix forward_batch(const Network& net, const Matrix& x) {
    return std::move(detail::forward_cached(net, x).back());
}

inline Vector forward(const Network& net, const Vector& x) {
    Matrix row = x.transpose();
    return forward_batch(net, row).row(0).transpose();
}

/// -sum_c y(c) log p(c), with p clamped to kLogClamp.
inline double cross_entropy(const Vector& p, const Vector& y) {
    if (p.size() != y.size()) throw ShapeError("cross_entropy: dimension mismatch");
    double loss = 0.0;
    for (Index c = 0; c < p.size(); ++c)
        if (y(c) != 0.0) loss -= y(c) * std::log(std::max(p(c), kLogClamp));
    return loss;
}

inline double cross_entropy(const Vector& p, int label) {
    if (label < 0 || label >= p.size()) throw ShapeError("cross_entropy: label out of range");
    return -std::log(std::max(p(label), kLogClamp));
}

inline double squared_error(const Vector& p, const Vector& y) {
    if (p.size() != y.size()) throw ShapeError("squared_error: dimension mismatch");
    return (p - y).squaredNorm();
}

/// KL(uniform || mean of the rows of `predictions`).
inline double kl_regularizer(const Matrix& predictions) {
    if (predictions.rows() == 0) throw ShapeError("kl_regularizer: no predictions");
    const Vector mean = predictions.colwise().mean().transpose();
    const double prior = 1.0 / static_cast<double>(mean.size());
    double kl = 0.0;
    for (Index c = 0; c < mean.size(); ++c) kl += prior * std::log(prior / std::max(mean(c), kLogClamp));
    return kl;
}

struct Batch {
    Matrix features;  // n x d
    Matrix targets;   // n x classes, rows sum to 1
};

struct CrossEntropyLoss {};
struct SquaredErrorLoss {};

/// Mixed-batch objective: the first `labelled_rows` rows are scored with
/// cross-entropy, the remaining rows with squared error weighted by
/// `unlabelled_weight`, plus `reg_weight` times the uniform-prior KL term over
/// all rows.
struct CompositeLoss {
    Index labelled_rows = 0;
    double unlabelled_weight = 0.0;
    double reg_weight = 0.0;
};

using LossSpec = std::variant<CrossEntropyLoss, SquaredErrorLoss, CompositeLoss>;

namespace detail {

inline double cross_entropy_rows(const Matrix& p, const Matrix& y, Index begin, Index count, Matrix* dp) {
    if (count == 0) return 0.0;
    const double scale = 1.0 / static_cast<double>(count);
    double total = 0.0;
    for (Index r = begin; r < begin + count; ++r) {
        for (Index c = 0; c < p.cols(); ++c) {
            const double t = y(r, c);
            if (t == 0.0) continue;
            const double q = p(r, c);
            total -= t * std::log(std::max(q, kLogClamp));
            if (dp && q >= kLogClamp) (*dp)(r, c) -= scale * t / q;
        }
    }
    return total * scale;
}

inline double squared_error_rows(const Matrix& p, const Matrix& y, Index begin, Index count, double weight,
                                 Matrix* dp) {
    if (count == 0) return 0.0;
    const double scale = weight / static_cast<double>(count);
    const auto diff = (p.middleRows(begin, count) - y.middleRows(begin, count)).eval();
    if (dp) dp->middleRows(begin, count) += 2.0 * scale * diff;
    return scale * diff.squaredNorm();
}

inline double kl_rows(const Matrix& p, double weight, Matrix* dp) {
    const Index n = p.rows();
    const Vector mean = p.colwise().mean().transpose();
    const double prior = 1.0 / static_cast<double>(p.cols());
    double kl = 0.0;
    for (Index c = 0; c < mean.size(); ++c) {
        kl += prior * std::log(prior / std::max(mean(c), kLogClamp));
        if (dp && mean(c) >= kLogClamp) dp->col(c).array() -= weight * prior / (mean(c) * static_cast<double>(n));
    }
    return weight * kl;
}

// Mean batch loss; accumulates dLoss/dProbabilities into `dp` when given.
inline double loss_on_probabilities(const Matrix& p, const Matrix& y, const LossSpec& spec, Matrix* dp) {
    const Index n = p.rows();
    return std::visit(
        [&](const auto& s) -> double {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, CrossEntropyLoss>) {
                return cross_entropy_rows(p, y, 0, n, dp);
            } else if constexpr (std::is_same_v<S, SquaredErrorLoss>) {
                return squared_error_rows(p, y, 0, n, 1.0, dp);
            } else {
                if (s.labelled_rows < 0 || s.labelled_rows > n)
                    throw ShapeError("composite loss: labelled row count out of range");
                double loss = cross_entropy_rows(p, y, 0, s.labelled_rows, dp);
                loss += squared_error_rows(p, y, s.labelled_rows, n - s.labelled_rows, s.unlabelled_weight, dp);
                if (s.reg_weight != 0.0) loss += kl_rows(p, s.reg_weight, dp);
                return loss;
            }
        },
        spec);
}

inline void check_batch(const Network& net, const Batch& batch) {
    if (batch.features.rows() != batch.targets.rows()) throw ShapeError("batch features/targets row mismatch");
    if (batch.targets.cols() != net.output_width()) throw ShapeError("batch targets width does not match classes");
    if (batch.features.rows() == 0) throw ShapeError("empty batch");
}

}  // namespace detail

inline double batch_loss(const Network& net, const Batch& batch, const LossSpec& spec) {
    detail::check_batch(net, batch);
    const Matrix p = forward_batch(net, batch.features);
    return detail::loss_on_probabilities(p, batch.targets, spec, nullptr);
}

struct LossGradient {
    double loss = 0.0;
    ParameterSet grads;
};

/// Gradient of the mean batch loss with respect to every parameter.
inline LossGradient backward(const Network& net, const Batch& batch, const LossSpec& spec) {
    detail::check_batch(net, batch);
    const auto acts = detail::forward_cached(net, batch.features);
    const Matrix& p = acts.back();

    Matrix dp = Matrix::Zero(p.rows(), p.cols());
    LossGradient out;
    out.loss = detail::loss_on_probabilities(p, batch.targets, spec, &dp);

    // softmax Jacobian-vector product
    const Vector dot = (dp.array() * p.array()).rowwise().sum();
    Matrix dz = p.array() * (dp.colwise() - dot).array();

    const std::size_t L = net.layers.size();
    out.grads.weights.resize(L);
    out.grads.biases.resize(L);
    for (std::size_t k = L; k-- > 0;) {
        out.grads.weights[k] = dz.transpose() * acts[k];
        out.grads.biases[k] = dz.colwise().sum().transpose();
        if (k == 0) break;
        Matrix da = dz * net.layers[k].weights;
        dz = (acts[k].array() > 0.0).select(da.array(), 0.0).matrix();
    }
    return out;
}

struct OptimizerState {
    ParameterSet momentum_buffers;
    double learning_rate = 0.02;
    double momentum = 0.8;
    double weight_decay = 5e-4;
};

inline OptimizerState make_optimizer(const Network& net, double learning_rate, double momentum, double weight_decay) {
    return {ParameterSet::zeros_like(net), learning_rate, momentum, weight_decay};
}

/// One momentum-SGD step with L2 weight decay:
///   g' = g + wd * w;  b = mu * b + g';  w -= lr * b
inline void sgd_step(Network& net, const ParameterSet& grads, OptimizerState& state) {
    if (!grads.same_shape(net) || !state.momentum_buffers.same_shape(net))
        throw ShapeError("sgd_step: gradient or buffer shape does not match network");
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        auto& bw = state.momentum_buffers.weights[k];
        auto& bb = state.momentum_buffers.biases[k];
        bw = state.momentum * bw + grads.weights[k] + state.weight_decay * layer.weights;
        bb = state.momentum * bb + grads.biases[k] + state.weight_decay * layer.bias;
        layer.weights -= state.learning_rate * bw;
        layer.bias -= state.learning_rate * bb;
    }
}

// Checkpoint format (text, whitespace separated):
//
//   longremix-network
//   version 1
//   tag <int>
//   layers <L>
//   layer <in> <out> <relu|softmax>     (repeated L times, each followed by)
//   <out rows of <in> weights, row-major>
//   <out bias values>

inline constexpr int kCheckpointVersion = 1;

inline void save_network(const Network& net, std::ostream& os) {
    validate(net);
    os << "longremix-network\n";
    os << "version " << kCheckpointVersion << '\n';
    os << "tag " << net.tag << '\n';
    os << "layers " << net.layers.size() << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& l : net.layers) {
        os << "layer " << l.weights.cols() << ' ' << l.weights.rows() << ' '
           << (l.activation == Activation::relu ? "relu" : "softmax") << '\n';
        for (Index r = 0; r < l.weights.rows(); ++r) {
            for (Index c = 0; c < l.weights.cols(); ++c) os << (c ? " " : "") << l.weights(r, c);
            os << '\n';
        }
        for (Index r = 0; r < l.bias.size(); ++r) os << (r ? " " : "") << l.bias(r);
        os << '\n';
    }
}

inline Network load_network(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string got;
        if (!(is >> got) || got != word) throw ParseError("checkpoint: expected '" + word + "', got '" + got + "'");
    };
    expect("longremix-network");
    expect("version");
    int version = 0;
    if (!(is >> version)) throw ParseError("checkpoint: missing version");
    if (version != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    Network net;
    expect("tag");
    if (!(is >> net.tag)) throw ParseError("checkpoint: missing tag");
    expect("layers");
    std::size_t count = 0;
    if (!(is >> count) || count == 0) throw ParseError("checkpoint: bad layer count");
    for (std::size_t k = 0; k < count; ++k) {
        expect("layer");
        Index in = 0, out = 0;
        std::string act;
        if (!(is >> in >> out >> act) || in <= 0 || out <= 0) throw ParseError("checkpoint: bad layer header");
        DenseLayer l;
        if (act == "relu")
            l.activation = Activation::relu;
        else if (act == "softmax")
            l.activation = Activation::softmax;
        else
            throw ParseError("checkpoint: unknown activation '" + act + "'");
        l.weights.resize(out, in);
        l.bias.resize(out);
        for (Index r = 0; r < out; ++r)
            for (Index c = 0; c < in; ++c)
                if (!(is >> l.weights(r, c))) throw ParseError("checkpoint: truncated weights");
        for (Index r = 0; r < out; ++r)
            if (!(is >> l.bias(r))) throw ParseError("checkpoint: truncated bias");
        net.layers.push_back(std::move(l));
    }
    try {
        validate(net);
    } catch (const ShapeError& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    return net;
}

}  // namespace longremix
