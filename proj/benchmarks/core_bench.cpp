#include <benchmark/benchmark.h>

#include "rde/agents.hpp"
#include "rde/ensemble.hpp"
#include "rde/env.hpp"
#include "rde/mlp.hpp"
#include "rde/replay.hpp"
#include "rde/tabular.hpp"

namespace {

using namespace rde;

void BM_MlpForward(benchmark::State& state) {
    Rng rng(1, 0);
    const int width = static_cast<int>(state.range(0));
    const Mlp net = mlp_init({width, 64, 64, 4}, rng);
    std::vector<double> input(width);
    for (double& v : input) v = rng.uniform();
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(net, input));
    }
}
BENCHMARK(BM_MlpForward)->Arg(40)->Arg(80)->Arg(136);

void BM_MlpBackward(benchmark::State& state) {
    Rng rng(1, 0);
    const int width = static_cast<int>(state.range(0));
    const Mlp net = mlp_init({width, 64, 64, 4}, rng);
    std::vector<double> input(width);
    for (double& v : input) v = rng.uniform();
    ForwardCache cache;
    forward(net, input, &cache);
    const std::vector<double> ograd = {1.0, -0.5, 0.25, 0.0};
    GradientSet grads = zero_gradients(net);
    for (auto _ : state) {
        backward_accumulate(net, cache, ograd, grads);
        benchmark::DoNotOptimize(grads);
    }
}
BENCHMARK(BM_MlpBackward)->Arg(40)->Arg(80);

void BM_AdamStep(benchmark::State& state) {
    Rng rng(1, 0);
    Mlp net = mlp_init({80, 64, 64, 4}, rng);
    AdamState adam = adam_init(net);
    GradientSet grads = zero_gradients(net);
    Rng grng(2, 0);
    for (Matrix& m : grads.weight_grads)
        for (double& v : m.data) v = grng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        adam_step(net, grads, adam, 3e-4);
        benchmark::DoNotOptimize(net);
    }
}
BENCHMARK(BM_AdamStep);

void BM_DqnUpdate(benchmark::State& state) {
    const int batch_size = static_cast<int>(state.range(0));
    DqnConfig cfg;
    cfg.hidden = {64, 64};
    Rng init(3, 0);
    DqnAgent agent(80, 4, cfg, init);

    EnvSpec spec;
    spec.kind = EnvKind::FourRooms;
    spec.grid_size = 9;
    spec.randomize_goal = false;
    Environment env(spec);
    ReplayBuffer buffer(10000, env.observation_dim());
    Rng env_rng(4, 0);
    Observation obs = env.reset(env_rng);
    for (int t = 0; t < 2000; ++t) {
        const int a = static_cast<int>(env_rng.uniform_int(4));
        const StepResult r = env.step(a, env_rng);
        buffer.push(Transition{obs, a, r.reward, r.cost, r.next_obs, r.done});
        obs = (r.done || r.truncated) ? env.reset(env_rng) : r.next_obs;
    }
    Rng sample_rng(5, 0);
    Rng update_rng(6, 0);
    for (auto _ : state) {
        const auto batch = buffer.sample(batch_size, sample_rng);
        benchmark::DoNotOptimize(agent.update(batch, update_rng));
    }
}
BENCHMARK(BM_DqnUpdate)->Arg(32)->Arg(64)->Arg(256);

void BM_EnvStep(benchmark::State& state) {
    EnvSpec spec;
    spec.kind = EnvKind::FourRooms;
    spec.grid_size = 9;
    Environment env(spec);
    Rng rng(7, 0);
    env.reset(rng);
    long t = 0;
    for (auto _ : state) {
        const StepResult r = env.step(static_cast<int>(rng.uniform_int(4)), rng);
        if (r.done || r.truncated) env.reset(rng);
        benchmark::DoNotOptimize(t += 1);
    }
}
BENCHMARK(BM_EnvStep);

void BM_ReplaySample(benchmark::State& state) {
    ReplayBuffer buffer(100000, 80);
    Transition t;
    t.obs.assign(80, 0.0);
    t.next_obs.assign(80, 0.0);
    for (int i = 0; i < 50000; ++i) buffer.push(t);
    Rng rng(8, 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(buffer.sample(64, rng));
    }
}
BENCHMARK(BM_ReplaySample);

void BM_SelectionProbs(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<double> q(n);
    Rng rng(9, 0);
    for (double& v : q) v = rng.uniform(-5.0, 5.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(selection_probs(q, 50.0));
    }
}
BENCHMARK(BM_SelectionProbs)->Arg(2)->Arg(8);

void BM_ValueIteration(benchmark::State& state) {
    EnvSpec spec;
    spec.kind = EnvKind::FourRooms;
    spec.grid_size = 9;
    spec.randomize_goal = false;
    spec.layout_seed = 3;
    const TabularMdp mdp = to_tabular(spec);
    for (auto _ : state) {
        benchmark::DoNotOptimize(value_iteration(mdp, 0.97, 1e-8));
    }
}
BENCHMARK(BM_ValueIteration);

}  // namespace

BENCHMARK_MAIN();
