#pragma once

#include <span>
#include <vector>

#include "rde/mlp.hpp"
#include "rde/replay.hpp"
#include "rde/rng.hpp"

namespace rde {

// Linear epsilon decay, clamped at end after decay_steps.
struct EpsilonSchedule {
    double start = 0.9;
    double end = 0.05;
    long decay_steps = 100000;

    double at(long step) const {
        if (step >= decay_steps) return end;
        return start + (end - start) * static_cast<double>(step) / static_cast<double>(decay_steps);
    }
};

// TD targets y_i = r_i + discount * max_a Q_target(s'_i, a), cut at done.
std::vector<double> dqn_td_target(std::span<const Transition* const> batch, const Mlp& target_q,
                                  double discount);

// Gaussian-approximation CVaR of the discounted cost sum:
// q_c + risk_level^-1 * pdf(quantile(risk_level)) * sqrt(var_c).
// risk_level = 1 returns q_c (risk-neutral limit).
double cvar(double q_c, double var_c, double risk_level);

struct DqnConfig {
    std::vector<int> hidden = {64, 64};
    double discount = 0.99;
    double learning_rate = 3e-4;
    double tau = 0.005;             // soft target rate when target_update_period == 0
    long target_update_period = 0;  // > 0: hard copy every that many updates
};

// Q-learner with online and target networks.
class DqnAgent {
public:
    DqnAgent(int obs_dim, int n_actions, DqnConfig cfg, Rng& init_rng);

    int n_actions() const { return n_actions_; }
    std::vector<double> q_values(std::span<const double> obs) const;

    // Argmax with lowest-index tie-break.
    int act_greedy(std::span<const double> obs) const;
    // Uniform action with probability eps, greedy otherwise.
    int act_epsilon(std::span<const double> obs, double eps, Rng& rng) const;

    // Ensemble-facing surface.
    int propose(std::span<const double> obs, bool explore, double eps, Rng& rng) const;
    double value_of(std::span<const double> obs, int action) const;
    double cvar_of(std::span<const double> obs, int action) const;  // throws: reward-only agent

    // One Adam step on the mean squared TD error; returns the pre-update
    // loss and applies the configured target update.
    double update(std::span<const Transition* const> batch, Rng& rng);

    // depth < 0 or depth == layer count: full re-init (fresh optimizer and
    // target). Otherwise the last `depth` layers of both networks.
    void reset(int depth, Rng& rng);

    const Mlp& online() const { return online_; }
    const Mlp& target() const { return target_; }
    const AdamState& adam() const { return adam_; }
    long updates_done() const { return updates_done_; }

private:
    void apply_target_update();

    DqnConfig cfg_;
    int n_actions_;
    Mlp online_;
    Mlp target_;
    AdamState adam_;
    long updates_done_ = 0;
};

struct SafeAcConfig {
    std::vector<int> hidden = {64, 64};
    double discount = 0.99;
    double learning_rate = 3e-4;
    double tau = 0.005;
    long target_update_period = 0;
    double risk_level = 0.5;  // alpha in (0, 1]
    double cost_budget = 2.5;
    double lambda_init = 0.0;
    double lambda_step = 0.01;
    double actor_l2 = 1e-4;
};

// Discrete-action actor-critic with a CVaR safety critic: categorical
// actor, reward critic, cost mean critic, and a cost standard-deviation
// critic behind an exp transform, each with a target copy. A Lagrange
// multiplier is driven by projected dual ascent on the cost budget.
class SafeAcAgent {
public:
    SafeAcAgent(int obs_dim, int n_actions, SafeAcConfig cfg, Rng& init_rng);

    int n_actions() const { return n_actions_; }
    std::vector<double> action_probs(std::span<const double> obs) const;

    int act_greedy(std::span<const double> obs) const;  // argmax of actor logits
    int act_sample(std::span<const double> obs, Rng& rng) const;

    int propose(std::span<const double> obs, bool explore, double eps, Rng& rng) const;
    double value_of(std::span<const double> obs, int action) const;  // reward critic
    double cvar_of(std::span<const double> obs, int action) const;

    struct Losses {
        double actor = 0.0;
        double reward_critic = 0.0;
        double cost_mean = 0.0;
        double cost_std = 0.0;
    };

    // One Adam step per network plus one dual-ascent step on lambda.
    // Returns the summed pre-update critic loss.
    double update(std::span<const Transition* const> batch, Rng& rng);
    const Losses& last_losses() const { return losses_; }

    double lambda() const { return lambda_; }
    void reset(int depth, Rng& rng);

    double cost_mean_value(std::span<const double> obs, int action) const;
    double cost_std_value(std::span<const double> obs, int action) const;

private:
    void apply_target_updates();

    SafeAcConfig cfg_;
    int n_actions_;
    Mlp actor_;
    Mlp reward_critic_, reward_target_;
    Mlp cost_mean_critic_, cost_mean_target_;
    Mlp cost_std_critic_, cost_std_target_;
    AdamState actor_adam_, reward_adam_, cost_mean_adam_, cost_std_adam_;
    double lambda_ = 0.0;
    Losses losses_;
    long updates_done_ = 0;
};

}  // namespace rde
