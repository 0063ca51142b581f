// SPDX-License-Identifier: Apache-2.0
//
// beaminfer - beam inference from partial L1-RSRP measurements
// Copyright (C) 2026 The beaminfer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef BEAMINFER_NEURALNET_HPP
#define BEAMINFER_NEURALNET_HPP

#include "beaminfer/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

// Dense feed-forward networks with hand-written backpropagation. A batch is a
// matrix with one sample per column; all math is in double precision.

namespace beaminfer::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class Activation : std::uint8_t { leaky_relu = 0, sigmoid = 1, none = 2 };

inline constexpr double kLeakySlope = 0.2;

inline double leaky_relu(double v) noexcept { return v > 0.0 ? v : kLeakySlope * v; }
inline double sigmoid(double v) noexcept { return 1.0 / (1.0 + std::exp(-v)); }

struct DenseLayer {
    MatrixXd weights;  // out x in
    VectorXd bias;     // out
    Activation activation = Activation::none;

    std::size_t in() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

struct NetParams {
    std::vector<DenseLayer> layers;
    std::uint64_t init_seed = 0;
    std::uint64_t revision = 0;  // bumped by every parameter update; stale caches are rejected

    std::size_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().in(); }
    std::size_t output_dim() const noexcept { return layers.empty() ? 0 : layers.back().out(); }

    std::size_t parameter_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto &l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    bool all_finite() const
    {
        for (const auto &l : layers)
            if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
        return true;
    }

    friend bool operator==(const NetParams &a, const NetParams &b)
    {
        if (a.layers.size() != b.layers.size() || a.init_seed != b.init_seed) return false;
        for (std::size_t i = 0; i < a.layers.size(); ++i) {
            const auto &x = a.layers[i], &y = b.layers[i];
            if (x.activation != y.activation || x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols() ||
                x.weights != y.weights || x.bias != y.bias)
                return false;
        }
        return true;
    }
};

/// Layer i maps widths[i] -> widths[i+1] with activations[i]. Glorot-uniform
/// weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline NetParams make_network(const std::vector<std::size_t> &widths, const std::vector<Activation> &activations,
                              std::uint64_t seed)
{
    if (widths.size() < 2 || activations.size() != widths.size() - 1)
        throw ArgumentError("make_network: need n+1 widths for n activations");
    NetParams net;
    net.init_seed = seed;
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const auto in = static_cast<Eigen::Index>(widths[i]), out = static_cast<Eigen::Index>(widths[i + 1]);
        if (in == 0 || out == 0) throw ArgumentError("make_network: zero-width layer");
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        DenseLayer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index c = 0; c < in; ++c)
            for (Eigen::Index r = 0; r < out; ++r) layer.weights(r, c) = limit * (2.0 * uniform_unit(rng) - 1.0);
        layer.bias = VectorXd::Zero(out);
        layer.activation = activations[i];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct ForwardCache {
    std::vector<MatrixXd> inputs;   // input of layer i
    std::vector<MatrixXd> outputs;  // activated output of layer i
    std::uint64_t revision = 0;
    const NetParams *owner = nullptr;
};

inline void apply_activation(MatrixXd &z, Activation a)
{
    switch (a) {
    case Activation::leaky_relu: z = z.unaryExpr([](double v) { return leaky_relu(v); }); break;
    case Activation::sigmoid: z = z.unaryExpr([](double v) { return sigmoid(v); }); break;
    case Activation::none: break;
    }
}

inline MatrixXd forward(const NetParams &net, const MatrixXd &batch, ForwardCache *cache = nullptr)
{
    if (net.layers.empty()) throw ArgumentError("forward: empty network");
    if (static_cast<std::size_t>(batch.rows()) != net.input_dim())
        throw ArgumentError("forward: input has " + std::to_string(batch.rows()) + " rows, network expects " +
                            std::to_string(net.input_dim()));
    if (cache) {
        cache->inputs.clear();
        cache->outputs.clear();
        cache->revision = net.revision;
        cache->owner = &net;
    }
    MatrixXd h = batch;
    for (const auto &layer : net.layers) {
        MatrixXd z = layer.weights * h;
        z.colwise() += layer.bias;
        apply_activation(z, layer.activation);
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->outputs.push_back(z);
        }
        h = std::move(z);
    }
    return h;
}

inline VectorXd forward(const NetParams &net, const VectorXd &x, ForwardCache *cache = nullptr)
{
    return forward(net, MatrixXd(x), cache).col(0);
}

struct LayerGradient {
    MatrixXd weights;
    VectorXd bias;
};

struct Gradients {
    std::vector<LayerGradient> layers;
    MatrixXd input;  // dLoss/dInput, one column per sample

    Gradients &operator*=(double s)
    {
        for (auto &g : layers) {
            g.weights *= s;
            g.bias *= s;
        }
        input *= s;
        return *this;
    }
};

/// Backpropagates dLoss/dOutput through the cached forward pass. Parameter
/// gradients are summed over the batch columns.
inline Gradients backward(const NetParams &net, const ForwardCache &cache, const MatrixXd &d_output)
{
    if (cache.owner != &net || cache.revision != net.revision || cache.inputs.size() != net.layers.size())
        throw ContractError("backward: cache does not come from a forward pass of these parameters");
    if (d_output.rows() != cache.outputs.back().rows() || d_output.cols() != cache.outputs.back().cols())
        throw ArgumentError("backward: upstream gradient shape mismatch");
    Gradients g;
    g.layers.resize(net.layers.size());
    MatrixXd delta = d_output;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const auto &layer = net.layers[i];
        const MatrixXd &y = cache.outputs[i];
        switch (layer.activation) {
        case Activation::leaky_relu:
            // slope is positive, so sign(output) == sign(pre-activation)
            delta = delta.cwiseProduct(y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
            break;
        case Activation::sigmoid: delta = delta.cwiseProduct(y.unaryExpr([](double v) { return v * (1.0 - v); })); break;
        case Activation::none: break;
        }
        g.layers[i].weights = delta * cache.inputs[i].transpose();
        g.layers[i].bias = delta.rowwise().sum();
        delta = layer.weights.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
}

// ---- Losses -------------------------------------------------------------

struct LossResult {
    double value = 0.0;
    MatrixXd gradient;  // dLoss/dPred
};

inline constexpr double kSmoothL1Beta = 1.0;

/// Smooth L1 averaged over the selected elements only:
/// 0.5 d^2 / beta if |d| < beta, else |d| - 0.5 beta.
inline LossResult smooth_l1(const MatrixXd &pred, const MatrixXd &target, const BoolMatrix &selected,
                            double beta = kSmoothL1Beta)
{
    if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.rows() != selected.rows() ||
        pred.cols() != selected.cols())
        throw ArgumentError("smooth_l1: shape mismatch");
    const auto n = selected.count();
    if (n == 0) throw LossError("smooth_l1: empty selection");
    LossResult out;
    out.gradient = MatrixXd::Zero(pred.rows(), pred.cols());
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index c = 0; c < pred.cols(); ++c)
        for (Eigen::Index r = 0; r < pred.rows(); ++r) {
            if (!selected(r, c)) continue;
            const double d = pred(r, c) - target(r, c);
            const double ad = std::abs(d);
            if (ad < beta) {
                total += 0.5 * d * d / beta;
                out.gradient(r, c) = d / beta * inv_n;
            } else {
                total += ad - 0.5 * beta;
                out.gradient(r, c) = (d > 0.0 ? 1.0 : -1.0) * inv_n;
            }
        }
    out.value = total * inv_n;
    return out;
}

inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy on probabilities clamped to [1e-7, 1 - 1e-7].
inline LossResult bce(const MatrixXd &prob, const MatrixXd &label)
{
    if (prob.rows() != label.rows() || prob.cols() != label.cols()) throw ArgumentError("bce: shape mismatch");
    if (prob.size() == 0) throw LossError("bce: empty input");
    LossResult out;
    out.gradient.resize(prob.rows(), prob.cols());
    const double inv_n = 1.0 / static_cast<double>(prob.size());
    double total = 0.0;
    for (Eigen::Index c = 0; c < prob.cols(); ++c)
        for (Eigen::Index r = 0; r < prob.rows(); ++r) {
            const double p = std::clamp(prob(r, c), kProbClamp, 1.0 - kProbClamp);
            const double y = label(r, c);
            total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
            out.gradient(r, c) = (p - y) / (p * (1.0 - p)) * inv_n;
        }
    out.value = total * inv_n;
    return out;
}

// ---- Adam ---------------------------------------------------------------

struct AdamState {
    std::vector<MatrixXd> m_weights, v_weights;
    std::vector<VectorXd> m_bias, v_bias;
    std::uint64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState make_adam(const NetParams &net, double lr)
{
    AdamState s;
    s.lr = lr;
    for (const auto &l : net.layers) {
        s.m_weights.push_back(MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.v_weights.push_back(MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.m_bias.push_back(VectorXd::Zero(l.bias.size()));
        s.v_bias.push_back(VectorXd::Zero(l.bias.size()));
    }
    return s;
}

/// One bias-corrected Adam update of every layer.
inline void adam_step(NetParams &net, const Gradients &g, AdamState &s)
{
    if (g.layers.size() != net.layers.size() || s.m_weights.size() != net.layers.size())
        throw ArgumentError("adam_step: layer count mismatch");
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    auto update = [&](auto &param, const auto &grad, auto &m, auto &v) {
        if (grad.rows() != param.rows() || grad.cols() != param.cols()) throw ArgumentError("adam_step: shape mismatch");
        m = s.beta1 * m + (1.0 - s.beta1) * grad;
        v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
        param.array() -= s.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps);
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        update(net.layers[i].weights, g.layers[i].weights, s.m_weights[i], s.v_weights[i]);
        update(net.layers[i].bias, g.layers[i].bias, s.m_bias[i], s.v_bias[i]);
    }
    ++net.revision;
}

// ---- Checkpoints --------------------------------------------------------

inline constexpr std::uint32_t kNetMagic = 0x4e464942;  // "BIFN"
inline constexpr std::uint32_t kNetVersion = 1;

inline void write_params(BinaryWriter &w, const NetParams &net)
{
    w.put(kNetMagic);
    w.put(kNetVersion);
    w.put<std::uint64_t>(net.init_seed);
    w.put<std::uint64_t>(net.layers.size());
    for (const auto &l : net.layers) {
        w.put<std::uint64_t>(l.out());
        w.put<std::uint64_t>(l.in());
        w.put<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
        w.put_doubles({l.weights.data(), static_cast<std::size_t>(l.weights.size())});
        w.put_doubles({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
    }
}

inline NetParams read_params(BinaryReader &r)
{
    r.expect_magic(kNetMagic, kNetVersion, "network checkpoint");
    NetParams net;
    net.init_seed = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
        DenseLayer l;
        const auto out = static_cast<Eigen::Index>(r.get<std::uint64_t>());
        const auto in = static_cast<Eigen::Index>(r.get<std::uint64_t>());
        const auto act = r.get<std::uint8_t>();
        if (act > 2) throw IoError("network checkpoint: bad activation");
        l.activation = static_cast<Activation>(act);
        const auto w = r.get_doubles();
        const auto b = r.get_doubles();
        if (static_cast<Eigen::Index>(w.size()) != out * in || static_cast<Eigen::Index>(b.size()) != out)
            throw IoError("network checkpoint: layer shape mismatch");
        if (!net.layers.empty() && static_cast<Eigen::Index>(net.layers.back().out()) != in)
            throw IoError("network checkpoint: layer widths do not chain");
        l.weights = Eigen::Map<const MatrixXd>(w.data(), out, in);
        l.bias = Eigen::Map<const VectorXd>(b.data(), out);
        net.layers.push_back(std::move(l));
    }
    return net;
}

} // namespace beaminfer::nn

#endif
