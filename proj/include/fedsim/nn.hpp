#pragma once

// Dense feed-forward classifier: ReLU hidden layers, softmax output,
// mean-reduced categorical cross-entropy. Everything is a pure function of
// its arguments; weights and gradients are plain values.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;

    std::size_t layer_count() const { return hidden.size() + 1; }
    std::size_t fan_in(std::size_t layer) const { return layer == 0 ? input_dim : hidden[layer - 1]; }
    std::size_t fan_out(std::size_t layer) const {
        return layer == hidden.size() ? output_dim : hidden[layer];
    }

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (std::size_t l = 0; l < layer_count(); ++l) total += (fan_in(l) + 1) * fan_out(l);
        return total;
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline void validate(const NetworkSpec& spec) {
    require(spec.input_dim >= 1, "network input_dim must be positive");
    require(spec.output_dim >= 2, "network output_dim must be at least 2");
    for (std::size_t width : spec.hidden) require(width >= 1, "hidden layer widths must be positive");
}

template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight;  // [fan_in, fan_out]
    RowVector<Scalar> bias; // [fan_out]

    friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
        return a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
               a.bias.size() == b.bias.size() && a.weight == b.weight && a.bias == b.bias;
    }
};

/// A stack of dense-layer parameters. The tag separates model weights from
/// gradients at the type level while sharing the layout.
template <typename Scalar, typename Tag>
struct LayerStack {
    std::vector<DenseLayer<Scalar>> layers;

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (const auto& layer : layers) total += layer.weight.size() + layer.bias.size();
        return total;
    }

    /// Visits every parameter in a fixed order: per layer, weight row-major
    /// then bias.
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto& layer : layers) {
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i) fn(layer.weight.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias.data()[i]);
        }
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (const auto& layer : layers) {
            for (Eigen::Index i = 0; i < layer.weight.size(); ++i) fn(layer.weight.data()[i]);
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias.data()[i]);
        }
    }

    friend bool operator==(const LayerStack&, const LayerStack&) = default;
};

struct WeightsTag {};
struct GradientsTag {};

template <typename Scalar>
using ModelWeightsT = LayerStack<Scalar, WeightsTag>;
template <typename Scalar>
using GradientsT = LayerStack<Scalar, GradientsTag>;

template <typename Scalar>
struct BatchT {
    Matrix<Scalar> features;  // [b, input_dim]
    std::vector<int> labels;  // length b

    std::size_t size() const { return labels.size(); }
};

template <typename Scalar>
struct ForwardResult {
    Matrix<Scalar> probabilities;
    Scalar loss{};
};

template <typename Scalar>
struct GradientResult {
    Scalar loss{};
    GradientsT<Scalar> grads;
};

template <typename Scalar, typename TagA, typename TagB>
bool same_shape(const LayerStack<Scalar, TagA>& a, const LayerStack<Scalar, TagB>& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const auto& x = a.layers[l];
        const auto& y = b.layers[l];
        if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
            x.bias.size() != y.bias.size())
            return false;
    }
    return true;
}

template <typename Scalar, typename Tag>
bool matches(const NetworkSpec& spec, const LayerStack<Scalar, Tag>& params) {
    if (params.layers.size() != spec.layer_count()) return false;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto& layer = params.layers[l];
        const auto rows = static_cast<Eigen::Index>(spec.fan_in(l));
        const auto cols = static_cast<Eigen::Index>(spec.fan_out(l));
        if (layer.weight.rows() != rows || layer.weight.cols() != cols || layer.bias.size() != cols)
            return false;
    }
    return true;
}

/// Glorot-uniform weights in (-a, a), a = sqrt(6 / (fan_in + fan_out)), zero
/// biases. Draw order is layer by layer, weights row-major.
template <typename Scalar = double>
ModelWeightsT<Scalar> init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    validate(spec);
    Xoshiro256pp rng(seed);
    ModelWeightsT<Scalar> weights;
    weights.layers.reserve(spec.layer_count());
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto rows = static_cast<Eigen::Index>(spec.fan_in(l));
        const auto cols = static_cast<Eigen::Index>(spec.fan_out(l));
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        DenseLayer<Scalar> layer{Matrix<Scalar>(rows, cols), RowVector<Scalar>::Zero(cols)};
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
            layer.weight.data()[i] = static_cast<Scalar>(bound * (2.0 * rng.uniform() - 1.0));
        weights.layers.push_back(std::move(layer));
    }
    return weights;
}

template <typename Scalar = double>
ModelWeightsT<Scalar> zero_weights(const NetworkSpec& spec) {
    ModelWeightsT<Scalar> weights;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const auto rows = static_cast<Eigen::Index>(spec.fan_in(l));
        const auto cols = static_cast<Eigen::Index>(spec.fan_out(l));
        weights.layers.push_back({Matrix<Scalar>::Zero(rows, cols), RowVector<Scalar>::Zero(cols)});
    }
    return weights;
}

namespace detail {

template <typename Scalar>
void check_inputs(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                  const Matrix<Scalar>& features, const std::vector<int>& labels) {
    require(matches(spec, weights), "weights do not match the network spec");
    require(features.rows() >= 1, "batch must contain at least one sample");
    require(static_cast<std::size_t>(features.rows()) == labels.size(),
            "feature rows and label count differ");
    require(static_cast<std::size_t>(features.cols()) == spec.input_dim,
            "feature width does not match network input_dim");
    for (int label : labels)
        require(label >= 0 && static_cast<std::size_t>(label) < spec.output_dim,
                "label outside [0, output_dim)");
}

// Activations kept for backpropagation: inputs to every layer plus the
// final pre-softmax logits.
template <typename Scalar>
struct Trace {
    std::vector<Matrix<Scalar>> inputs;   // inputs[l] feeds layer l
    Matrix<Scalar> logits;
};

template <typename Scalar>
Trace<Scalar> run_layers(const ModelWeightsT<Scalar>& weights, const Matrix<Scalar>& features) {
    Trace<Scalar> trace;
    trace.inputs.reserve(weights.layers.size());
    trace.inputs.push_back(features);
    for (std::size_t l = 0; l < weights.layers.size(); ++l) {
        const auto& layer = weights.layers[l];
        Matrix<Scalar> z = trace.inputs.back() * layer.weight;
        z.rowwise() += layer.bias;
        if (l + 1 == weights.layers.size()) {
            trace.logits = std::move(z);
        } else {
            trace.inputs.push_back(z.cwiseMax(Scalar(0)));
        }
    }
    return trace;
}

// Row-wise stable softmax. Writes probabilities and returns the
// per-sample negative log-likelihood of the true class.
template <typename Scalar>
std::vector<Scalar> softmax_nll(const Matrix<Scalar>& logits, const std::vector<int>& labels,
                                Matrix<Scalar>& probabilities) {
    probabilities.resize(logits.rows(), logits.cols());
    std::vector<Scalar> nll(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const Scalar peak = logits.row(r).maxCoeff();
        Scalar total = 0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            const Scalar e = std::exp(logits(r, c) - peak);
            probabilities(r, c) = e;
            total += e;
        }
        probabilities.row(r) /= total;
        const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(r)]);
        nll[static_cast<std::size_t>(r)] = std::log(total) - (logits(r, y) - peak);
    }
    return nll;
}

template <typename Scalar>
Scalar mean_in_order(const std::vector<Scalar>& values) {
    Scalar sum = 0;
    for (Scalar v : values) sum += v;
    return sum / static_cast<Scalar>(values.size());
}

}  // namespace detail

template <typename Scalar>
ForwardResult<Scalar> forward(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                              const BatchT<Scalar>& batch) {
    detail::check_inputs(spec, weights, batch.features, batch.labels);
    const auto trace = detail::run_layers(weights, batch.features);
    ForwardResult<Scalar> out;
    out.loss = detail::mean_in_order(detail::softmax_nll(trace.logits, batch.labels, out.probabilities));
    return out;
}

/// Analytic backpropagation of the mean cross-entropy. The returned loss is
/// computed by the same path as forward() and matches it exactly.
template <typename Scalar>
GradientResult<Scalar> compute_gradients(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                                         const BatchT<Scalar>& batch) {
    detail::check_inputs(spec, weights, batch.features, batch.labels);
    const auto trace = detail::run_layers(weights, batch.features);
    Matrix<Scalar> delta;
    GradientResult<Scalar> out;
    out.loss = detail::mean_in_order(detail::softmax_nll(trace.logits, batch.labels, delta));

    // dL/dlogits = (softmax - onehot) / b
    const auto b = static_cast<Scalar>(batch.size());
    for (Eigen::Index r = 0; r < delta.rows(); ++r)
        delta(r, static_cast<Eigen::Index>(batch.labels[static_cast<std::size_t>(r)])) -= Scalar(1);
    delta /= b;

    const std::size_t n_layers = weights.layers.size();
    out.grads.layers.resize(n_layers);
    for (std::size_t step = 0; step < n_layers; ++step) {
        const std::size_t l = n_layers - 1 - step;
        const auto& input = trace.inputs[l];
        auto& g = out.grads.layers[l];
        g.weight = input.transpose() * delta;
        g.bias = delta.colwise().sum();
        if (l > 0) {
            Matrix<Scalar> upstream = delta * weights.layers[l].weight.transpose();
            // ReLU gate; input > 0 exactly where the pre-activation was positive.
            delta = (input.array() > Scalar(0)).select(upstream, Scalar(0));
        }
    }
    return out;
}

/// weights - eta * grads, element-wise.
template <typename Scalar>
ModelWeightsT<Scalar> sgd_step(const ModelWeightsT<Scalar>& weights, const GradientsT<Scalar>& grads,
                               Scalar eta) {
    require(same_shape(weights, grads), "gradients are not shape-congruent with weights");
    require(eta >= Scalar(0), "learning rate must be non-negative");
    ModelWeightsT<Scalar> out = weights;
    if (eta == Scalar(0)) return out;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        out.layers[l].weight -= eta * grads.layers[l].weight;
        out.layers[l].bias -= eta * grads.layers[l].bias;
    }
    return out;
}

/// Central finite differences of the batch loss, one parameter at a time.
/// Test oracle for compute_gradients.
template <typename Scalar>
GradientsT<Scalar> finite_diff_grad(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                                    const BatchT<Scalar>& batch, Scalar eps_fd) {
    require(eps_fd > Scalar(0), "finite-difference step must be positive");
    ModelWeightsT<Scalar> probe = weights;
    GradientsT<Scalar> grads;
    grads.layers.resize(weights.layers.size());

    auto central = [&](Scalar& slot) {
        const Scalar saved = slot;
        slot = saved + eps_fd;
        const Scalar up = forward(spec, probe, batch).loss;
        slot = saved - eps_fd;
        const Scalar down = forward(spec, probe, batch).loss;
        slot = saved;
        return (up - down) / (Scalar(2) * eps_fd);
    };

    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        auto& g = grads.layers[l];
        g.weight.resize(layer.weight.rows(), layer.weight.cols());
        g.bias.resize(layer.bias.size());
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
            g.weight.data()[i] = central(layer.weight.data()[i]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
            g.bias.data()[i] = central(layer.bias.data()[i]);
    }
    return grads;
}

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean cross-entropy and argmax accuracy (ties go to the lowest class
/// index) over a full feature matrix, processed in fixed-size chunks.
template <typename Scalar>
Evaluation evaluate(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                    const Matrix<Scalar>& features, const std::vector<int>& labels) {
    if (features.rows() == 0 || labels.empty()) throw ContractViolation("cannot evaluate on an empty dataset");
    detail::check_inputs(spec, weights, features, labels);

    constexpr Eigen::Index kChunk = 1024;
    Scalar loss_sum = 0;
    std::size_t correct = 0;
    Matrix<Scalar> probabilities;
    for (Eigen::Index start = 0; start < features.rows(); start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, features.rows() - start);
        const std::vector<int> chunk_labels(labels.begin() + start, labels.begin() + start + rows);
        const auto trace = detail::run_layers(weights, Matrix<Scalar>(features.middleRows(start, rows)));
        for (Scalar v : detail::softmax_nll(trace.logits, chunk_labels, probabilities)) loss_sum += v;
        for (Eigen::Index r = 0; r < rows; ++r) {
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < probabilities.cols(); ++c)
                if (probabilities(r, c) > probabilities(r, best)) best = c;
            if (best == chunk_labels[static_cast<std::size_t>(r)]) ++correct;
        }
    }
    const auto n = static_cast<double>(labels.size());
    return {static_cast<double>(loss_sum) / n, static_cast<double>(correct) / n};
}

using ModelWeights = ModelWeightsT<double>;
using Gradients = GradientsT<double>;
using Batch = BatchT<double>;

}  // namespace fedsim
