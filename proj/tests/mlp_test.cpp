#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rde/errors.hpp"
#include "rde/mlp.hpp"

using namespace rde;

namespace {

bool bit_identical(const Mlp& a, const Mlp& b) {
    if (a.layer_dims != b.layer_dims) return false;
    for (int l = 0; l < a.layer_count(); ++l) {
        if (a.weights[l].data != b.weights[l].data) return false;
        if (a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("mlp_init bounds, zero biases, determinism") {
    Rng rng(11, 0);
    const Mlp net = mlp_init({2, 3, 1}, rng);

    const double bound0 = std::sqrt(6.0 / (2 + 3));
    for (double w : net.weights[0].data) CHECK(std::abs(w) <= bound0);
    const double bound1 = std::sqrt(6.0 / (3 + 1));
    for (double w : net.weights[1].data) CHECK(std::abs(w) <= bound1);
    for (const auto& b : net.biases)
        for (double v : b) CHECK(v == 0.0);

    Rng rng_again(11, 0);
    const Mlp net_again = mlp_init({2, 3, 1}, rng_again);
    CHECK(bit_identical(net, net_again));
}

TEST_CASE("mlp_init distinct streams give distinct parameters") {
    Rng a(5, 0), b(5, 1);
    const Mlp net_a = mlp_init({4, 8, 8, 3}, a);
    const Mlp net_b = mlp_init({4, 8, 8, 3}, b);
    bool any_diff = false;
    for (int l = 0; l < net_a.layer_count() && !any_diff; ++l)
        any_diff = net_a.weights[l].data != net_b.weights[l].data;
    CHECK(any_diff);
}

TEST_CASE("mlp_init rejects bad dims") {
    Rng rng(0, 0);
    CHECK_THROWS_AS(mlp_init({3}, rng), std::invalid_argument);
    CHECK_THROWS_AS(mlp_init({3, 0, 2}, rng), std::invalid_argument);
}

TEST_CASE("forward identity, relu cutoff and hand arithmetic") {
    SUBCASE("identity single layer") {
        Mlp net;
        net.layer_dims = {2, 2};
        net.weights = {Matrix(2, 2)};
        net.weights[0].at(0, 0) = 1.0;
        net.weights[0].at(1, 1) = 1.0;
        net.biases = {{0.0, 0.0}};
        const auto out = forward(net, std::vector<double>{1.5, -2.0});
        CHECK(out[0] == 1.5);
        CHECK(out[1] == -2.0);
    }
    SUBCASE("relu kills a negative hidden unit") {
        Mlp net;
        net.layer_dims = {1, 1, 1};
        net.weights = {Matrix(1, 1), Matrix(1, 1)};
        net.weights[0].at(0, 0) = 1.0;
        net.weights[1].at(0, 0) = 1.0;
        net.biases = {{0.0}, {0.0}};
        ForwardCache cache;
        const auto out = forward(net, std::vector<double>{-3.0}, &cache);
        CHECK(cache.activations[1][0] == 0.0);
        CHECK(out[0] == 0.0);
    }
    SUBCASE("hand-computed [1,1,1] net") {
        Mlp net;
        net.layer_dims = {1, 1, 1};
        net.weights = {Matrix(1, 1), Matrix(1, 1)};
        net.weights[0].at(0, 0) = 2.0;
        net.weights[1].at(0, 0) = 2.0;
        net.biases = {{1.0}, {1.0}};
        const auto out = forward(net, std::vector<double>{1.0});
        // hidden = relu(2*1+1) = 3, output = 2*3+1 = 7
        CHECK(out[0] == 7.0);
    }
    SUBCASE("errors") {
        Rng rng(3, 0);
        const Mlp net = mlp_init({2, 2}, rng);
        CHECK_THROWS_AS(forward(net, std::vector<double>{1.0}), std::invalid_argument);
        CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, std::nan("")}),
                        std::invalid_argument);
    }
}

TEST_CASE("backward base cases") {
    SUBCASE("zero output grad gives zero gradients") {
        Rng rng(9, 0);
        const Mlp net = mlp_init({3, 5, 2}, rng);
        ForwardCache cache;
        forward(net, std::vector<double>{0.3, -0.4, 0.9}, &cache);
        const GradientSet grads = backward(net, cache, std::vector<double>{0.0, 0.0});
        for (const Matrix& m : grads.weight_grads)
            for (double v : m.data) CHECK(v == 0.0);
        for (const auto& b : grads.bias_grads)
            for (double v : b) CHECK(v == 0.0);
    }
    SUBCASE("single linear neuron chain rule") {
        Mlp net;
        net.layer_dims = {1, 1};
        net.weights = {Matrix(1, 1)};
        net.weights[0].at(0, 0) = 0.7;
        net.biases = {{0.1}};
        ForwardCache cache;
        forward(net, std::vector<double>{2.0}, &cache);
        const GradientSet grads = backward(net, cache, std::vector<double>{1.0});
        CHECK(grads.weight_grads[0].at(0, 0) == 2.0);
        CHECK(grads.bias_grads[0][0] == 1.0);
    }
}

TEST_CASE("backward matches central finite differences") {
    // Independent oracle: perturb every parameter by +-h and compare the
    // quotient against the analytic gradient of L = sum(output * ograd).
    Rng rng(2024, 0);
    const double h = 1e-4;
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n_layers = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<int> dims;
        dims.push_back(1 + static_cast<int>(rng.uniform_int(16)));
        for (int l = 0; l < n_layers; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_int(16)));

        Mlp net = mlp_init(dims, rng);
        // Random biases so the relu pattern is not degenerate.
        for (auto& b : net.biases)
            for (double& v : b) v = rng.uniform(-0.5, 0.5);

        std::vector<double> input(dims.front());
        for (double& v : input) v = rng.uniform(-2.0, 2.0);
        std::vector<double> ograd(dims.back());
        for (double& v : ograd) v = rng.uniform(-2.0, 2.0);

        ForwardCache cache;
        forward(net, input, &cache);
        const GradientSet grads = backward(net, cache, ograd);

        auto loss = [&](const Mlp& candidate) {
            const auto out = forward(candidate, input);
            double sum = 0.0;
            for (std::size_t i = 0; i < out.size(); ++i) sum += out[i] * ograd[i];
            return sum;
        };

        double max_rel = 0.0;
        for (int l = 0; l < net.layer_count(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].data.size(); ++i) {
                Mlp plus = net, minus = net;
                plus.weights[l].data[i] += h;
                minus.weights[l].data[i] -= h;
                const double numeric = (loss(plus) - loss(minus)) / (2.0 * h);
                const double analytic = grads.weight_grads[l].data[i];
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-2});
                if (std::abs(numeric - analytic) > 1e-6)
                    max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
            }
            for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
                Mlp plus = net, minus = net;
                plus.biases[l][i] += h;
                minus.biases[l][i] -= h;
                const double numeric = (loss(plus) - loss(minus)) / (2.0 * h);
                const double analytic = grads.bias_grads[l][i];
                const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-2});
                if (std::abs(numeric - analytic) > 1e-6)
                    max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
            }
        }
        CHECK(max_rel < 1e-4);
        checked += 1;
    }
    CHECK(checked == 100);
}

TEST_CASE("adam_step") {
    SUBCASE("zero gradients leave parameters unchanged") {
        Rng rng(4, 0);
        Mlp net = mlp_init({2, 3, 1}, rng);
        const Mlp before = net;
        AdamState state = adam_init(net);
        adam_step(net, zero_gradients(net), state, 1e-3);
        CHECK(bit_identical(net, before));
        CHECK(state.step_count == 1);
    }
    SUBCASE("first-step bias correction on a scalar parameter") {
        Mlp net;
        net.layer_dims = {1, 1};
        net.weights = {Matrix(1, 1)};
        net.weights[0].at(0, 0) = 0.5;
        net.biases = {{0.0}};
        AdamState state = adam_init(net);
        GradientSet grads = zero_gradients(net);
        grads.weight_grads[0].at(0, 0) = 1.0;
        adam_step(net, grads, state, 0.001);
        const double expected_delta = 0.001 / (1.0 + 1e-8);
        CHECK(std::abs((0.5 - net.weights[0].at(0, 0)) - expected_delta) < 1e-9);
        CHECK(net.biases[0][0] == 0.0);
    }
    SUBCASE("identical inputs give bit-identical results") {
        Rng rng(8, 0);
        Mlp net1 = mlp_init({3, 4, 2}, rng);
        Mlp net2 = net1;
        AdamState s1 = adam_init(net1);
        AdamState s2 = adam_init(net2);
        GradientSet grads = zero_gradients(net1);
        Rng grng(8, 1);
        for (Matrix& m : grads.weight_grads)
            for (double& v : m.data) v = grng.uniform(-1.0, 1.0);
        adam_step(net1, grads, s1, 3e-4);
        adam_step(net2, grads, s2, 3e-4);
        CHECK(bit_identical(net1, net2));
    }
    SUBCASE("non-finite gradients raise DivergenceError") {
        Rng rng(4, 0);
        Mlp net = mlp_init({2, 2}, rng);
        AdamState state = adam_init(net);
        GradientSet grads = zero_gradients(net);
        grads.weight_grads[0].at(0, 0) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(adam_step(net, grads, state, 1e-3), DivergenceError);
    }
}

TEST_CASE("reset_layers") {
    SUBCASE("depth zero is a no-op") {
        Rng rng(21, 0);
        Mlp net = mlp_init({4, 8, 3}, rng);
        AdamState state = adam_init(net);
        state.step_count = 17;
        const Mlp before = net;
        Rng reset_rng(99, 0);
        reset_layers(net, state, 0, reset_rng);
        CHECK(bit_identical(net, before));
        CHECK(state.step_count == 17);
    }
    SUBCASE("depth one re-inits only the last layer and zeroes its moments") {
        Rng rng(21, 0);
        Mlp net = mlp_init({4, 8, 8, 3}, rng);
        AdamState state = adam_init(net);
        // Dirty the moments.
        for (auto& m : state.m_weights)
            for (double& v : m.data) v = 0.25;
        state.step_count = 5;
        const Mlp before = net;
        Rng reset_rng(77, 0);
        reset_layers(net, state, 1, reset_rng);
        CHECK(net.weights[0].data == before.weights[0].data);
        CHECK(net.weights[1].data == before.weights[1].data);
        CHECK(net.weights[2].data != before.weights[2].data);
        for (double v : state.m_weights[2].data) CHECK(v == 0.0);
        for (double v : state.m_weights[0].data) CHECK(v == 0.25);
        CHECK(state.step_count == 5);  // partial reset keeps the step count
    }
    SUBCASE("full depth equals a fresh init from the same stream") {
        Rng rng(3, 4);
        Mlp net = mlp_init({5, 6, 2}, rng);
        AdamState state = adam_init(net);
        state.step_count = 9;
        Rng stream_a(123, 9);
        reset_layers(net, state, net.layer_count(), stream_a);
        Rng stream_b(123, 9);
        const Mlp fresh = mlp_init({5, 6, 2}, stream_b);
        CHECK(bit_identical(net, fresh));
        CHECK(state.step_count == 0);
    }
    SUBCASE("prefix layers are bit-exact for every depth") {
        for (int depth = 0; depth <= 3; ++depth) {
            Rng rng(55, 0);
            Mlp net = mlp_init({4, 6, 6, 2}, rng);
            AdamState state = adam_init(net);
            const Mlp before = net;
            Rng reset_rng(1000 + depth, 0);
            reset_layers(net, state, depth, reset_rng);
            for (int l = 0; l < net.layer_count() - depth; ++l) {
                CHECK(net.weights[l].data == before.weights[l].data);
                CHECK(net.biases[l] == before.biases[l]);
            }
        }
    }
    SUBCASE("depth out of range") {
        Rng rng(2, 0);
        Mlp net = mlp_init({2, 2}, rng);
        AdamState state = adam_init(net);
        CHECK_THROWS_AS(reset_layers(net, state, 2, rng), std::invalid_argument);
        CHECK_THROWS_AS(reset_layers(net, state, -1, rng), std::invalid_argument);
    }
}
