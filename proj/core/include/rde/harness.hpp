#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rde/agents.hpp"
#include "rde/ensemble.hpp"
#include "rde/env.hpp"
#include "rde/metrics.hpp"

namespace rde {

enum class Algorithm { Base, VanillaReset, Rde, BaseSafe, SrSafe, RdeSafe };

bool algorithm_is_safe(Algorithm a);
bool algorithm_uses_reset(Algorithm a);
std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);  // throws ConfigError

// Full declarative run description; every field has a serializable default.
struct ExperimentConfig {
    std::string run_name;
    EnvSpec env;
    Algorithm algorithm = Algorithm::Base;
    int ensemble_size = 1;            // N, >= 2 for rde variants
    double replay_ratio = 1.0;        // updates per env step, may be < 1
    long base_reset_interval = 40000;  // update count at replay ratio 1, one agent
    int reset_depth = -1;             // -1 = all layers
    double beta = 50.0;
    double kappa = 0.8;
    double alpha_risk = 0.5;
    double cost_budget = 2.5;
    double discount = 0.99;
    double learning_rate = 3e-4;
    int batch_size = 32;
    long buffer_capacity = 100000;
    EpsilonSchedule epsilon;
    long total_env_steps = 200000;
    long eval_every = 2000;
    int eval_episodes = 20;
    std::uint64_t seed = 1;
    std::vector<int> hidden_dims = {64, 64};
    double tau = 0.005;
    long target_update_period = 0;
    TemperatureMode temperature_mode = TemperatureMode::NormalizedLogits;
    bool shared_minibatch = false;
    double lambda_step = 0.01;
    double actor_l2 = 1e-4;
    int collapse_window = 10;  // evaluation points inspected after each reset
};

// Throws ConfigError on inconsistent settings (rde needs N >= 2, etc.).
void validate_config(const ExperimentConfig& cfg);

// Env-step gap between consecutive reset events:
// floor(base_interval / (N * replay_ratio)). Throws ConfigError when the
// result would be zero.
long reset_interval_for(long base_interval_updates, double replay_ratio, int ensemble_size);

struct EvalPoint {
    long env_step = 0;
    double return_mean = 0.0;
    double return_std = 0.0;
    double cost_mean = 0.0;
    double train_loss = 0.0;       // mean loss since the previous eval point
    double cumulative_cost = 0.0;  // training cost incurred so far
};

struct SelectionTrace {
    long env_step = 0;
    std::vector<double> probs;
    int chosen = 0;
    int oldest = 0;
};

struct MetricsLog {
    int ensemble_size = 1;
    std::vector<EvalPoint> evals;
    std::vector<ResetEvent> resets;
    std::vector<SelectionTrace> selections;  // one record per env step
    long total_env_steps = 0;
    long updates_per_agent = 0;
    double cumulative_training_cost = 0.0;
    bool diverged = false;
    long diverged_step = -1;
    std::string divergence_note;
    double wall_seconds = 0.0;

    double final_return() const { return evals.empty() ? 0.0 : evals.back().return_mean; }
    std::vector<std::pair<long, double>> eval_curve() const;
    std::vector<long> reset_steps() const;
};

// Deterministic given the config (seed included). A diverged run returns
// with diverged=true and the metrics collected so far.
MetricsLog run_experiment(const ExperimentConfig& cfg);

// Sweep axes; seeds is always an axis, the rest default to the template's
// single value when empty.
struct SweepAxes {
    std::vector<std::uint64_t> seeds = {1};
    std::vector<double> rr_values;
    std::vector<double> beta_values;
    std::vector<int> n_values;
    std::vector<Algorithm> algorithms;
};

struct SweepCell {
    ExperimentConfig config;  // seed holds the first seed of the cell
    std::vector<std::uint64_t> seeds;
    std::vector<double> final_returns;
    std::vector<double> cumulative_costs;
    std::vector<double> collapse_maxes;
    int failed_runs = 0;
    double iqm_final_return = 0.0;
    double mean_cumulative_cost = 0.0;
    double collapse_max = 0.0;
    double collapse_mean = 0.0;
    double wall_seconds = 0.0;
};

struct SweepReport {
    std::vector<SweepCell> cells;
};

using RunSink = std::function<void(std::size_t cell_index, std::uint64_t seed, const MetricsLog&)>;

// Runs the cartesian product of axes (failed runs are marked, never fatal).
// workers > 1 executes runs in parallel; aggregation happens after all
// workers finish, so results are independent of scheduling.
SweepReport sweep(const ExperimentConfig& config_template, const SweepAxes& axes, int workers = 1,
                  const RunSink& per_run = {});

// Per-run CSV with columns env_step, eval_return_mean, eval_return_std,
// eval_cost_mean, train_loss, reset_agent_index, p_select_0..p_select_{N-1}.
// Rows are emitted at evaluation points and reset events.
void write_metrics_csv(const MetricsLog& log, const std::string& path);

struct ParsedRun {
    std::vector<std::pair<long, double>> eval_curve;
    std::vector<std::pair<long, double>> cost_curve;
    std::vector<long> reset_steps;
};

ParsedRun read_metrics_csv(const std::string& path);

}  // namespace rde
