#pragma once

#include <span>
#include <vector>

#include "rde/rng.hpp"

namespace rde {

// Row-major dense matrix; rows = fan_out, cols = fan_in.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

// Fully-connected network: ReLU hidden activations, identity output.
// weights[l] has shape (layer_dims[l+1] x layer_dims[l]).
struct Mlp {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

// Per-layer parameter gradients, shapes mirroring an Mlp.
struct GradientSet {
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

// Adam first/second moment buffers mirroring an Mlp.
struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<std::vector<double>> m_biases, v_biases;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
};

// Intermediate values from forward(), sufficient for backward().
// activations[0] is the input; activations[L] the output.
struct ForwardCache {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre_activations;
};

// Uniform Glorot init: weights ~ U(-b, b) with b = sqrt(6 / (fan_in + fan_out)),
// biases zero. Deterministic given the rng state. layer_dims needs at least
// two entries, all positive.
Mlp mlp_init(const std::vector<int>& layer_dims, Rng& rng);

AdamState adam_init(const Mlp& net);
GradientSet zero_gradients(const Mlp& net);

std::vector<double> forward(const Mlp& net, std::span<const double> input,
                            ForwardCache* cache = nullptr);

// Gradients of a loss whose gradient w.r.t. the network output is
// output_grad. ReLU subgradient at 0 is taken as 0.
GradientSet backward(const Mlp& net, const ForwardCache& cache,
                     std::span<const double> output_grad);

// Same, accumulating into an existing GradientSet (batch loops).
void backward_accumulate(const Mlp& net, const ForwardCache& cache,
                         std::span<const double> output_grad, GradientSet& into);

void scale_gradients(GradientSet& grads, double factor);

// Standard Adam with bias correction; increments state.step_count.
// Throws DivergenceError on non-finite gradients.
void adam_step(Mlp& net, const GradientSet& grads, AdamState& state, double lr);

// Re-initializes the last `depth` layers exactly as mlp_init would and zeroes
// their Adam moments. depth equal to the layer count also resets step_count.
void reset_layers(Mlp& net, AdamState& state, int depth, Rng& rng);

// Weight-only variant for networks without an optimizer (target copies).
void reset_layers(Mlp& net, int depth, Rng& rng);

}  // namespace rde
