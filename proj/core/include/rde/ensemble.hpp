#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rde/math.hpp"
#include "rde/rng.hpp"

namespace rde {

// How the composition temperature is applied.
//   NormalizedLogits: logits_i = beta * v_i / max(|v_1|..|v_N|, 1e-8).
//     beta = 0 is uniform, beta < 0 inverts preference, large beta sharpens.
//   AsPrinted: logits_i = v_i / alpha with alpha = beta / max(v_1..v_N)
//     (signed max); kept for comparison, requires beta != 0.
enum class TemperatureMode { NormalizedLogits, AsPrinted };

enum class SelectMode { Reward, Safe };

// Value-weighted composition weights from the oldest agent's estimates of
// each proposal.
std::vector<double> selection_probs(std::span<const double> q_hat, double beta,
                                    TemperatureMode mode = TemperatureMode::NormalizedLogits);

// Cost-side weights; sign inverted so low estimated cost gets high mass.
std::vector<double> safe_selection_probs(std::span<const double> c_hat, double beta);

// Convex combination kappa * p_reward + (1 - kappa) * p_cost.
std::vector<double> mix_safe(std::span<const double> p_reward, std::span<const double> p_cost,
                             double kappa);

struct SelectionDistribution {
    std::vector<double> probs;
    int chosen = 0;
    std::vector<double> q_hat_values;
    int oldest_index = 0;
};

struct ResetEvent {
    long env_step = 0;
    int agent_index = 0;
};

// N agents composed into one behavior policy, with a sequential staggered
// reset scheduler. The replay buffer is owned elsewhere and untouched by
// resets. Single-owner mutable.
template <class Agent>
class Ensemble {
public:
    // reset_interval_steps == 0 disables resets (plain ensemble / base).
    // reset_depth < 0 re-initializes every layer.
    Ensemble(std::vector<Agent> agents, long reset_interval_steps, int reset_depth, double beta,
             double kappa, TemperatureMode temperature_mode = TemperatureMode::NormalizedLogits)
        : agents_(std::move(agents)),
          reset_interval_steps_(reset_interval_steps),
          reset_depth_(reset_depth),
          beta_(beta),
          kappa_(kappa),
          temperature_mode_(temperature_mode),
          last_reset_step_(agents_.size(), -1) {
        if (agents_.empty()) throw std::invalid_argument("Ensemble: needs at least one agent");
        if (reset_interval_steps_ < 0)
            throw std::invalid_argument("Ensemble: reset interval must be >= 0");
        if (!(kappa_ >= 0.0 && kappa_ <= 1.0))
            throw std::invalid_argument("Ensemble: kappa must lie in [0, 1]");
    }

    int size() const { return static_cast<int>(agents_.size()); }
    Agent& agent(int i) { return agents_[i]; }
    const Agent& agent(int i) const { return agents_[i]; }

    bool any_reset_yet() const { return any_reset_yet_; }
    long reset_interval_steps() const { return reset_interval_steps_; }
    const std::vector<long>& last_reset_steps() const { return last_reset_step_; }
    int next_reset_index() const { return next_reset_index_; }
    double beta() const { return beta_; }

    // Index of the agent whose most recent reset lies furthest in the past;
    // never-reset agents outrank all, ties break to the lowest index.
    // Returns 0 before any reset (selection is uniform then anyway).
    int oldest_agent_index() const {
        int oldest = 0;
        for (int i = 1; i < size(); ++i) {
            if (last_reset_step_[i] < last_reset_step_[oldest]) oldest = i;
        }
        return oldest;
    }

    // Collects one proposal per agent, weights them by the oldest agent's
    // value estimates (uniform before the first reset), and samples the
    // executed proposal index.
    std::pair<int, SelectionDistribution> select_action(std::span<const double> obs,
                                                        SelectMode mode, bool explore, double eps,
                                                        Rng& rng) const {
        const int n = size();
        std::vector<int> proposals(n);
        for (int i = 0; i < n; ++i) proposals[i] = agents_[i].propose(obs, explore, eps, rng);

        SelectionDistribution dist;
        dist.oldest_index = oldest_agent_index();
        const Agent& oldest = agents_[dist.oldest_index];

        dist.q_hat_values.resize(n);
        for (int i = 0; i < n; ++i) dist.q_hat_values[i] = oldest.value_of(obs, proposals[i]);

        if (!any_reset_yet_) {
            dist.probs.assign(n, 1.0 / n);
        } else if (mode == SelectMode::Reward) {
            dist.probs = selection_probs(dist.q_hat_values, beta_, temperature_mode_);
        } else {
            std::vector<double> c_hat(n);
            for (int i = 0; i < n; ++i) c_hat[i] = oldest.cvar_of(obs, proposals[i]);
            const std::vector<double> p_reward =
                selection_probs(dist.q_hat_values, beta_, temperature_mode_);
            const std::vector<double> p_cost = safe_selection_probs(c_hat, beta_);
            dist.probs = mix_safe(p_reward, p_cost, kappa_);
        }

        const double u = rng.uniform();
        double acc = 0.0;
        dist.chosen = n - 1;
        for (int i = 0; i < n; ++i) {
            acc += dist.probs[i];
            if (u < acc) {
                dist.chosen = i;
                break;
            }
        }
        return {proposals[dist.chosen], dist};
    }

    // Fires at positive multiples of the reset interval: re-initializes the
    // agent at the cyclic cursor and stamps its reset time.
    std::optional<ResetEvent> maybe_reset(long env_step, Rng& rng) {
        if (env_step < 0) throw std::invalid_argument("maybe_reset: env_step must be >= 0");
        if (reset_interval_steps_ == 0 || env_step == 0) return std::nullopt;
        if (env_step % reset_interval_steps_ != 0) return std::nullopt;
        const int index = next_reset_index_;
        agents_[index].reset(reset_depth_, rng);
        last_reset_step_[index] = env_step;
        any_reset_yet_ = true;
        next_reset_index_ = (next_reset_index_ + 1) % size();
        return ResetEvent{env_step, index};
    }

private:
    std::vector<Agent> agents_;
    long reset_interval_steps_;
    int reset_depth_;
    double beta_;
    double kappa_;
    TemperatureMode temperature_mode_;
    std::vector<long> last_reset_step_;
    int next_reset_index_ = 0;
    bool any_reset_yet_ = false;
};

}  // namespace rde
