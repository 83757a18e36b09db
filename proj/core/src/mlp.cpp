#include "rde/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "rde/errors.hpp"

namespace rde {

namespace {

void init_layer(Mlp& net, int layer, Rng& rng) {
    const int fan_in = net.layer_dims[layer];
    const int fan_out = net.layer_dims[layer + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix& w = net.weights[layer];
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    for (double& b : net.biases[layer]) b = 0.0;
}

void check_finite_input(std::span<const double> input) {
    for (double v : input) {
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    }
}

}  // namespace

Mlp mlp_init(const std::vector<int>& layer_dims, Rng& rng) {
    if (layer_dims.size() < 2) throw std::invalid_argument("mlp_init: need at least two layer dims");
    for (int d : layer_dims) {
        if (d < 1) throw std::invalid_argument("mlp_init: layer widths must be positive");
    }
    Mlp net;
    net.layer_dims = layer_dims;
    const int layers = static_cast<int>(layer_dims.size()) - 1;
    net.weights.reserve(layers);
    net.biases.reserve(layers);
    for (int l = 0; l < layers; ++l) {
        net.weights.emplace_back(layer_dims[l + 1], layer_dims[l]);
        net.biases.emplace_back(layer_dims[l + 1], 0.0);
    }
    for (int l = 0; l < layers; ++l) init_layer(net, l, rng);
    return net;
}

AdamState adam_init(const Mlp& net) {
    AdamState state;
    for (int l = 0; l < net.layer_count(); ++l) {
        state.m_weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
        state.v_weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
        state.m_biases.emplace_back(net.biases[l].size(), 0.0);
        state.v_biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return state;
}

GradientSet zero_gradients(const Mlp& net) {
    GradientSet grads;
    for (int l = 0; l < net.layer_count(); ++l) {
        grads.weight_grads.emplace_back(net.weights[l].rows, net.weights[l].cols);
        grads.bias_grads.emplace_back(net.biases[l].size(), 0.0);
    }
    return grads;
}

std::vector<double> forward(const Mlp& net, std::span<const double> input, ForwardCache* cache) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw std::invalid_argument("forward: input width mismatch");
    check_finite_input(input);

    const int layers = net.layer_count();
    if (cache != nullptr) {
        cache->activations.resize(layers + 1);
        cache->pre_activations.resize(layers);
        cache->activations[0].assign(input.begin(), input.end());
    }

    std::vector<double> current(input.begin(), input.end());
    for (int l = 0; l < layers; ++l) {
        const Matrix& w = net.weights[l];
        std::vector<double> pre(w.rows);
        for (int r = 0; r < w.rows; ++r) {
            double acc = net.biases[l][r];
            const double* row = &w.data[static_cast<std::size_t>(r) * w.cols];
            for (int c = 0; c < w.cols; ++c) acc += row[c] * current[c];
            pre[r] = acc;
        }
        if (cache != nullptr) cache->pre_activations[l] = pre;
        const bool hidden = l + 1 < layers;
        if (hidden) {
            for (double& v : pre) v = v > 0.0 ? v : 0.0;
        }
        current = std::move(pre);
        if (cache != nullptr) cache->activations[l + 1] = current;
    }
    return current;
}

void backward_accumulate(const Mlp& net, const ForwardCache& cache,
                         std::span<const double> output_grad, GradientSet& into) {
    const int layers = net.layer_count();
    if (static_cast<int>(cache.activations.size()) != layers + 1 ||
        static_cast<int>(cache.pre_activations.size()) != layers)
        throw std::invalid_argument("backward: cache does not match network");
    if (static_cast<int>(output_grad.size()) != net.output_dim())
        throw std::invalid_argument("backward: output_grad width mismatch");

    std::vector<double> delta(output_grad.begin(), output_grad.end());
    for (int l = layers - 1; l >= 0; --l) {
        const Matrix& w = net.weights[l];
        const std::vector<double>& act_in = cache.activations[l];
        Matrix& dw = into.weight_grads[l];
        std::vector<double>& db = into.bias_grads[l];
        for (int r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            db[r] += d;
            double* dw_row = &dw.data[static_cast<std::size_t>(r) * w.cols];
            for (int c = 0; c < w.cols; ++c) dw_row[c] += d * act_in[c];
        }
        if (l == 0) break;
        std::vector<double> prev(w.cols, 0.0);
        for (int r = 0; r < w.rows; ++r) {
            const double d = delta[r];
            const double* row = &w.data[static_cast<std::size_t>(r) * w.cols];
            for (int c = 0; c < w.cols; ++c) prev[c] += row[c] * d;
        }
        // ReLU subgradient, 0 at exactly 0.
        const std::vector<double>& pre = cache.pre_activations[l - 1];
        for (int c = 0; c < w.cols; ++c) {
            if (!(pre[c] > 0.0)) prev[c] = 0.0;
        }
        delta = std::move(prev);
    }
}

GradientSet backward(const Mlp& net, const ForwardCache& cache,
                     std::span<const double> output_grad) {
    GradientSet grads = zero_gradients(net);
    backward_accumulate(net, cache, output_grad, grads);
    return grads;
}

void scale_gradients(GradientSet& grads, double factor) {
    for (Matrix& m : grads.weight_grads)
        for (double& v : m.data) v *= factor;
    for (auto& b : grads.bias_grads)
        for (double& v : b) v *= factor;
}

namespace {

void adam_update_span(std::span<double> params, std::span<const double> grads,
                      std::span<double> m, std::span<double> v, const AdamState& state,
                      double lr, double bias1, double bias2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) throw DivergenceError("adam_step: non-finite gradient");
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
    }
}

}  // namespace

void adam_step(Mlp& net, const GradientSet& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
    if (static_cast<int>(grads.weight_grads.size()) != net.layer_count())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.step_count += 1;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (int l = 0; l < net.layer_count(); ++l) {
        adam_update_span(net.weights[l].data, grads.weight_grads[l].data,
                         state.m_weights[l].data, state.v_weights[l].data, state, lr, bias1, bias2);
        adam_update_span(net.biases[l], grads.bias_grads[l], state.m_biases[l], state.v_biases[l],
                         state, lr, bias1, bias2);
    }
}

void reset_layers(Mlp& net, AdamState& state, int depth, Rng& rng) {
    const int layers = net.layer_count();
    if (depth < 0 || depth > layers) throw std::invalid_argument("reset_layers: depth out of range");
    for (int l = layers - depth; l < layers; ++l) {
        init_layer(net, l, rng);
        for (double& v : state.m_weights[l].data) v = 0.0;
        for (double& v : state.v_weights[l].data) v = 0.0;
        for (double& v : state.m_biases[l]) v = 0.0;
        for (double& v : state.v_biases[l]) v = 0.0;
    }
    if (depth == layers) state.step_count = 0;
}

void reset_layers(Mlp& net, int depth, Rng& rng) {
    const int layers = net.layer_count();
    if (depth < 0 || depth > layers) throw std::invalid_argument("reset_layers: depth out of range");
    for (int l = layers - depth; l < layers; ++l) init_layer(net, l, rng);
}

}  // namespace rde
