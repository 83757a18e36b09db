#include "rde/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <type_traits>

#include "rde/errors.hpp"
#include "rde/replay.hpp"

namespace rde {

namespace {

// Stream ids for the per-run rng families; per-agent streams are offset by
// the agent index so ablations perturb only their own stream.
constexpr std::uint64_t kSelectStream = 1;
constexpr std::uint64_t kEnvStream = 2;
constexpr std::uint64_t kEvalStream = 3;
constexpr std::uint64_t kResetStream = 4;
constexpr std::uint64_t kInitStreamBase = 100;
constexpr std::uint64_t kReplayStreamBase = 200;
constexpr std::uint64_t kUpdateStreamBase = 300;

}  // namespace

bool algorithm_is_safe(Algorithm a) {
    return a == Algorithm::BaseSafe || a == Algorithm::SrSafe || a == Algorithm::RdeSafe;
}

bool algorithm_uses_reset(Algorithm a) {
    return a == Algorithm::VanillaReset || a == Algorithm::Rde || a == Algorithm::SrSafe ||
           a == Algorithm::RdeSafe;
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Base: return "base";
        case Algorithm::VanillaReset: return "sr";
        case Algorithm::Rde: return "rde";
        case Algorithm::BaseSafe: return "base_safe";
        case Algorithm::SrSafe: return "sr_safe";
        case Algorithm::RdeSafe: return "rde_safe";
    }
    return "base";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "base") return Algorithm::Base;
    if (name == "sr" || name == "vanilla_reset") return Algorithm::VanillaReset;
    if (name == "rde") return Algorithm::Rde;
    if (name == "base_safe") return Algorithm::BaseSafe;
    if (name == "sr_safe" || name == "vanilla_reset_safe") return Algorithm::SrSafe;
    if (name == "rde_safe") return Algorithm::RdeSafe;
    throw ConfigError("unknown algorithm '" + name + "'");
}

void validate_config(const ExperimentConfig& cfg) {
    if (!(cfg.replay_ratio > 0.0)) throw ConfigError("replay_ratio must be positive");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
    if (cfg.total_env_steps < 1) throw ConfigError("total_env_steps must be >= 1");
    if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (cfg.ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");
    if (!(cfg.discount >= 0.0 && cfg.discount < 1.0)) throw ConfigError("discount must lie in [0, 1)");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(cfg.kappa >= 0.0 && cfg.kappa <= 1.0)) throw ConfigError("kappa must lie in [0, 1]");
    if (!(cfg.alpha_risk > 0.0 && cfg.alpha_risk <= 1.0))
        throw ConfigError("alpha_risk must lie in (0, 1]");
    if (cfg.collapse_window < 1) throw ConfigError("collapse_window must be >= 1");

    const bool rde = cfg.algorithm == Algorithm::Rde || cfg.algorithm == Algorithm::RdeSafe;
    const bool sr = cfg.algorithm == Algorithm::VanillaReset || cfg.algorithm == Algorithm::SrSafe;
    if (rde && cfg.ensemble_size < 2) throw ConfigError("rde algorithms need ensemble_size >= 2");
    if (sr && cfg.ensemble_size != 1) throw ConfigError("sr algorithms run a single agent");
    if (algorithm_uses_reset(cfg.algorithm)) {
        if (cfg.base_reset_interval < 1) throw ConfigError("base_reset_interval must be >= 1");
        // Fails early when the interval floors to zero.
        reset_interval_for(cfg.base_reset_interval, cfg.replay_ratio, cfg.ensemble_size);
    }
    if (cfg.temperature_mode == TemperatureMode::AsPrinted && cfg.beta == 0.0)
        throw ConfigError("temperature_mode=as_printed requires beta != 0");
}

long reset_interval_for(long base_interval_updates, double replay_ratio, int ensemble_size) {
    if (base_interval_updates < 1) throw ConfigError("reset_interval_for: base interval must be >= 1");
    if (!(replay_ratio > 0.0)) throw ConfigError("reset_interval_for: replay ratio must be positive");
    if (ensemble_size < 1) throw ConfigError("reset_interval_for: ensemble size must be >= 1");
    const double exact =
        static_cast<double>(base_interval_updates) / (ensemble_size * replay_ratio);
    const long interval = static_cast<long>(std::floor(exact + 1e-9));
    if (interval == 0)
        throw ConfigError("reset_interval_for: interval floors to zero env steps");
    return interval;
}

std::vector<std::pair<long, double>> MetricsLog::eval_curve() const {
    std::vector<std::pair<long, double>> curve;
    curve.reserve(evals.size());
    for (const EvalPoint& p : evals) curve.emplace_back(p.env_step, p.return_mean);
    return curve;
}

std::vector<long> MetricsLog::reset_steps() const {
    std::vector<long> steps;
    steps.reserve(resets.size());
    for (const ResetEvent& r : resets) steps.push_back(r.env_step);
    return steps;
}

namespace {

DqnConfig dqn_config_of(const ExperimentConfig& cfg) {
    DqnConfig c;
    c.hidden = cfg.hidden_dims;
    c.discount = cfg.discount;
    c.learning_rate = cfg.learning_rate;
    c.tau = cfg.tau;
    c.target_update_period = cfg.target_update_period;
    return c;
}

SafeAcConfig safe_config_of(const ExperimentConfig& cfg) {
    SafeAcConfig c;
    c.hidden = cfg.hidden_dims;
    c.discount = cfg.discount;
    c.learning_rate = cfg.learning_rate;
    c.tau = cfg.tau;
    c.target_update_period = cfg.target_update_period;
    c.risk_level = cfg.alpha_risk;
    c.cost_budget = cfg.cost_budget;
    c.lambda_step = cfg.lambda_step;
    c.actor_l2 = cfg.actor_l2;
    return c;
}

struct EvalResult {
    double return_mean = 0.0;
    double return_std = 0.0;
    double cost_mean = 0.0;
};

template <class Agent>
EvalResult evaluate_policy(const Ensemble<Agent>& ens, Environment& env, SelectMode mode,
                           int episodes, Rng& rng) {
    double sum = 0.0, sum_sq = 0.0, cost_sum = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        Observation obs = env.reset(rng);
        double ep_return = 0.0, ep_cost = 0.0;
        for (;;) {
            const auto [action, dist] = ens.select_action(obs, mode, /*explore=*/false, 0.0, rng);
            const StepResult sr = env.step(action, rng);
            ep_return += sr.reward;
            ep_cost += sr.cost;
            if (sr.done || sr.truncated) break;
            obs = sr.next_obs;
        }
        sum += ep_return;
        sum_sq += ep_return * ep_return;
        cost_sum += ep_cost;
    }
    EvalResult out;
    out.return_mean = sum / episodes;
    out.return_std = std::sqrt(std::max(0.0, sum_sq / episodes - out.return_mean * out.return_mean));
    out.cost_mean = cost_sum / episodes;
    return out;
}

template <class Agent>
MetricsLog run_loop(const ExperimentConfig& cfg) {
    const auto start_time = std::chrono::steady_clock::now();

    Environment train_env(cfg.env);
    Environment eval_env(cfg.env);
    const int obs_dim = train_env.observation_dim();
    const int n_actions = train_env.action_count();
    const int n = cfg.ensemble_size;

    Rng select_rng(cfg.seed, kSelectStream);
    Rng env_rng(cfg.seed, kEnvStream);
    Rng eval_rng(cfg.seed, kEvalStream);
    Rng reset_rng(cfg.seed, kResetStream);
    std::vector<Rng> replay_rngs, update_rngs;
    std::vector<Agent> agents;
    agents.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng init_rng(cfg.seed, kInitStreamBase + static_cast<std::uint64_t>(i));
        if constexpr (std::is_same_v<Agent, DqnAgent>) {
            agents.emplace_back(obs_dim, n_actions, dqn_config_of(cfg), init_rng);
        } else {
            agents.emplace_back(obs_dim, n_actions, safe_config_of(cfg), init_rng);
        }
        replay_rngs.emplace_back(cfg.seed, kReplayStreamBase + static_cast<std::uint64_t>(i));
        update_rngs.emplace_back(cfg.seed, kUpdateStreamBase + static_cast<std::uint64_t>(i));
    }

    long interval = 0;
    if (algorithm_uses_reset(cfg.algorithm))
        interval = reset_interval_for(cfg.base_reset_interval, cfg.replay_ratio, n);
    Ensemble<Agent> ens(std::move(agents), interval, cfg.reset_depth, cfg.beta, cfg.kappa,
                        cfg.temperature_mode);

    ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity), obs_dim);
    const SelectMode mode = algorithm_is_safe(cfg.algorithm) ? SelectMode::Safe : SelectMode::Reward;

    MetricsLog log;
    log.ensemble_size = n;
    log.total_env_steps = cfg.total_env_steps;
    log.selections.reserve(static_cast<std::size_t>(cfg.total_env_steps));

    double loss_sum = 0.0;
    long loss_count = 0;
    long updates_done = 0;

    auto record_eval = [&](long step) {
        const EvalResult r = evaluate_policy(ens, eval_env, mode, cfg.eval_episodes, eval_rng);
        EvalPoint p;
        p.env_step = step;
        p.return_mean = r.return_mean;
        p.return_std = r.return_std;
        p.cost_mean = r.cost_mean;
        p.train_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
        p.cumulative_cost = log.cumulative_training_cost;
        log.evals.push_back(p);
        loss_sum = 0.0;
        loss_count = 0;
    };

    record_eval(0);

    Observation obs = train_env.reset(env_rng);
    for (long t = 1; t <= cfg.total_env_steps; ++t) {
        const double eps = cfg.epsilon.at(t - 1);
        const auto [action, dist] = ens.select_action(obs, mode, /*explore=*/true, eps, select_rng);
        const StepResult sr = train_env.step(action, env_rng);
        log.cumulative_training_cost += sr.cost;
        log.selections.push_back({t, dist.probs, dist.chosen, dist.oldest_index});
        buffer.push(Transition{std::move(obs), action, sr.reward, sr.cost, sr.next_obs, sr.done});
        obs = (sr.done || sr.truncated) ? train_env.reset(env_rng) : sr.next_obs;

        // Replay-ratio budget: drive updates_done to floor(replay_ratio * t).
        const long due = static_cast<long>(std::floor(cfg.replay_ratio * static_cast<double>(t) + 1e-9));
        while (updates_done < due && !log.diverged) {
            std::vector<const Transition*> shared;
            if (cfg.shared_minibatch)
                shared = buffer.sample(static_cast<std::size_t>(cfg.batch_size), replay_rngs[0]);
            for (int i = 0; i < ens.size(); ++i) {
                const std::vector<const Transition*> batch =
                    cfg.shared_minibatch
                        ? shared
                        : buffer.sample(static_cast<std::size_t>(cfg.batch_size), replay_rngs[i]);
                double loss = 0.0;
                try {
                    loss = ens.agent(i).update(batch, update_rngs[i]);
                } catch (const DivergenceError& e) {
                    log.diverged = true;
                    log.diverged_step = t;
                    log.divergence_note = e.what();
                    break;
                }
                if (!std::isfinite(loss)) {
                    log.diverged = true;
                    log.diverged_step = t;
                    log.divergence_note = "non-finite training loss";
                    break;
                }
                loss_sum += loss;
                loss_count += 1;
            }
            if (!log.diverged) updates_done += 1;
        }
        if (log.diverged) break;

        if (t % cfg.eval_every == 0) record_eval(t);
        if (auto event = ens.maybe_reset(t, reset_rng)) log.resets.push_back(*event);
    }

    if (!log.diverged && (log.evals.empty() || log.evals.back().env_step != cfg.total_env_steps))
        record_eval(cfg.total_env_steps);

    log.updates_per_agent = updates_done;
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return log;
}

}  // namespace

MetricsLog run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    if (algorithm_is_safe(cfg.algorithm)) return run_loop<SafeAcAgent>(cfg);
    return run_loop<DqnAgent>(cfg);
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

SweepReport sweep(const ExperimentConfig& config_template, const SweepAxes& axes, int workers,
                  const RunSink& per_run) {
    if (axes.seeds.empty()) throw ConfigError("sweep: seeds axis must be nonempty");

    const std::vector<Algorithm> algorithms =
        axes.algorithms.empty() ? std::vector<Algorithm>{config_template.algorithm}
                                : axes.algorithms;
    const std::vector<double> rrs =
        axes.rr_values.empty() ? std::vector<double>{config_template.replay_ratio} : axes.rr_values;
    const std::vector<double> betas =
        axes.beta_values.empty() ? std::vector<double>{config_template.beta} : axes.beta_values;
    const std::vector<int> ns =
        axes.n_values.empty() ? std::vector<int>{config_template.ensemble_size} : axes.n_values;

    SweepReport report;
    for (Algorithm alg : algorithms) {
        for (double rr : rrs) {
            for (double beta : betas) {
                for (int n : ns) {
                    SweepCell cell;
                    cell.config = config_template;
                    cell.config.algorithm = alg;
                    cell.config.replay_ratio = rr;
                    cell.config.beta = beta;
                    cell.config.ensemble_size = n;
                    // In an explicit algorithm comparison the non-ensemble
                    // baselines run their canonical single agent.
                    const bool rde_like = alg == Algorithm::Rde || alg == Algorithm::RdeSafe;
                    if (!axes.algorithms.empty() && !rde_like) cell.config.ensemble_size = 1;
                    cell.config.seed = axes.seeds.front();
                    cell.seeds = axes.seeds;
                    validate_config(cell.config);
                    report.cells.push_back(std::move(cell));
                }
            }
        }
    }

    struct Job {
        std::size_t cell;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < report.cells.size(); ++c)
        for (std::uint64_t s : axes.seeds) jobs.push_back({c, s});

    struct RunOutcome {
        bool failed = true;
        double final_return = 0.0;
        double cumulative_cost = 0.0;
        double collapse_max = 0.0;
        double wall_seconds = 0.0;
    };
    std::vector<RunOutcome> outcomes(jobs.size());

    std::atomic<std::size_t> next_job{0};
    std::mutex sink_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t j = next_job.fetch_add(1);
            if (j >= jobs.size()) return;
            ExperimentConfig cfg = report.cells[jobs[j].cell].config;
            cfg.seed = jobs[j].seed;
            RunOutcome& out = outcomes[j];
            try {
                const MetricsLog log = run_experiment(cfg);
                out.wall_seconds = log.wall_seconds;
                if (per_run) {
                    std::lock_guard<std::mutex> lock(sink_mutex);
                    per_run(jobs[j].cell, jobs[j].seed, log);
                }
                if (!log.diverged) {
                    out.failed = false;
                    out.final_return = log.final_return();
                    out.cumulative_cost = log.cumulative_training_cost;
                    if (!log.resets.empty()) {
                        const CollapseStats stats = collapse_metric(
                            log.eval_curve(), log.reset_steps(), cfg.collapse_window);
                        out.collapse_max = stats.max_drop;
                    }
                }
            } catch (const std::exception&) {
                out.failed = true;
            }
        }
    };

    const int thread_count = std::max(1, workers);
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(thread_count);
        for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t j = 0; j < jobs.size(); ++j) {
        SweepCell& cell = report.cells[jobs[j].cell];
        const RunOutcome& out = outcomes[j];
        cell.wall_seconds += out.wall_seconds;
        if (out.failed) {
            cell.failed_runs += 1;
            continue;
        }
        cell.final_returns.push_back(out.final_return);
        cell.cumulative_costs.push_back(out.cumulative_cost);
        cell.collapse_maxes.push_back(out.collapse_max);
    }
    for (SweepCell& cell : report.cells) {
        if (cell.final_returns.empty()) continue;
        cell.iqm_final_return = iqm(cell.final_returns);
        double cost_sum = 0.0, collapse_sum = 0.0;
        for (double v : cell.cumulative_costs) cost_sum += v;
        for (double v : cell.collapse_maxes) {
            collapse_sum += v;
            cell.collapse_max = std::max(cell.collapse_max, v);
        }
        cell.mean_cumulative_cost = cost_sum / cell.cumulative_costs.size();
        cell.collapse_mean = collapse_sum / cell.collapse_maxes.size();
    }
    return report;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");

    out << "env_step,eval_return_mean,eval_return_std,eval_cost_mean,train_loss,reset_agent_index";
    for (int i = 0; i < log.ensemble_size; ++i) out << ",p_select_" << i;
    out << "\n";

    // Row per event step: evaluation points and reset events, merged.
    std::size_t eval_i = 0, reset_i = 0, trace_i = 0;
    while (eval_i < log.evals.size() || reset_i < log.resets.size()) {
        long step;
        if (eval_i < log.evals.size() && reset_i < log.resets.size())
            step = std::min(log.evals[eval_i].env_step, log.resets[reset_i].env_step);
        else if (eval_i < log.evals.size())
            step = log.evals[eval_i].env_step;
        else
            step = log.resets[reset_i].env_step;

        const bool has_eval = eval_i < log.evals.size() && log.evals[eval_i].env_step == step;
        const bool has_reset = reset_i < log.resets.size() && log.resets[reset_i].env_step == step;

        out << step << ",";
        if (has_eval) {
            const EvalPoint& p = log.evals[eval_i];
            out << format_double(p.return_mean) << "," << format_double(p.return_std) << ","
                << format_double(p.cost_mean) << "," << format_double(p.train_loss);
        } else {
            out << ",,,";
        }
        out << "," << (has_reset ? log.resets[reset_i].agent_index : -1);

        // Selection snapshot at this step (uniform placeholder at step 0).
        while (trace_i < log.selections.size() && log.selections[trace_i].env_step < step) ++trace_i;
        const bool has_trace =
            trace_i < log.selections.size() && log.selections[trace_i].env_step == step;
        for (int i = 0; i < log.ensemble_size; ++i) {
            const double p =
                has_trace ? log.selections[trace_i].probs[i] : 1.0 / log.ensemble_size;
            out << "," << format_double(p);
        }
        out << "\n";

        if (has_eval) ++eval_i;
        if (has_reset) ++reset_i;
    }
    if (!out) throw IoError("failed while writing '" + path + "'");
}

ParsedRun read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    ParsedRun run;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty metrics csv '" + path + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 6) throw IoError("malformed metrics row in '" + path + "'");
        const long step = std::stol(fields[0]);
        if (!fields[1].empty()) {
            run.eval_curve.emplace_back(step, std::stod(fields[1]));
            run.cost_curve.emplace_back(step, std::stod(fields[3]));
        }
        const int reset_agent = std::stoi(fields[5]);
        if (reset_agent >= 0) run.reset_steps.push_back(step);
    }
    return run;
}

}  // namespace rde
