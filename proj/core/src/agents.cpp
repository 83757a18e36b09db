#include "rde/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rde/math.hpp"

namespace rde {

namespace {

int argmax_lowest(const std::vector<double>& values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

std::vector<int> full_dims(int obs_dim, const std::vector<int>& hidden, int out_dim) {
    std::vector<int> dims;
    dims.push_back(obs_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out_dim);
    return dims;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
    for (int l = 0; l < online.layer_count(); ++l) {
        auto& tw = target.weights[l].data;
        const auto& ow = online.weights[l].data;
        for (std::size_t i = 0; i < tw.size(); ++i) tw[i] += tau * (ow[i] - tw[i]);
        auto& tb = target.biases[l];
        const auto& ob = online.biases[l];
        for (std::size_t i = 0; i < tb.size(); ++i) tb[i] += tau * (ob[i] - tb[i]);
    }
}

// Copies the last `depth` layers of src into dst (matching architectures).
void copy_tail_layers(Mlp& dst, const Mlp& src, int depth) {
    for (int l = src.layer_count() - depth; l < src.layer_count(); ++l) {
        dst.weights[l] = src.weights[l];
        dst.biases[l] = src.biases[l];
    }
}

constexpr double kStdRawClamp = 30.0;

double positive_std(double raw) { return std::exp(std::min(raw, kStdRawClamp)); }

}  // namespace

std::vector<double> dqn_td_target(std::span<const Transition* const> batch, const Mlp& target_q,
                                  double discount) {
    if (batch.empty()) throw std::invalid_argument("dqn_td_target: empty batch");
    std::vector<double> targets;
    targets.reserve(batch.size());
    for (const Transition* t : batch) {
        double y = t->reward;
        if (!t->done) {
            const std::vector<double> q_next = forward(target_q, t->next_obs);
            y += discount * *std::max_element(q_next.begin(), q_next.end());
        }
        targets.push_back(y);
    }
    return targets;
}

double cvar(double q_c, double var_c, double risk_level) {
    if (!(risk_level > 0.0 && risk_level <= 1.0))
        throw std::invalid_argument("cvar: risk_level must lie in (0, 1]");
    if (var_c < 0.0) throw std::invalid_argument("cvar: var_c must be >= 0");
    if (risk_level == 1.0) return q_c;
    const double coeff = normal_pdf(normal_quantile(risk_level)) / risk_level;
    return q_c + coeff * std::sqrt(var_c);
}

DqnAgent::DqnAgent(int obs_dim, int n_actions, DqnConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)), n_actions_(n_actions) {
    online_ = mlp_init(full_dims(obs_dim, cfg_.hidden, n_actions), init_rng);
    target_ = online_;
    adam_ = adam_init(online_);
}

std::vector<double> DqnAgent::q_values(std::span<const double> obs) const {
    return forward(online_, obs);
}

int DqnAgent::act_greedy(std::span<const double> obs) const { return argmax_lowest(q_values(obs)); }

int DqnAgent::act_epsilon(std::span<const double> obs, double eps, Rng& rng) const {
    if (rng.uniform() < eps) return static_cast<int>(rng.uniform_int(n_actions_));
    return act_greedy(obs);
}

int DqnAgent::propose(std::span<const double> obs, bool explore, double eps, Rng& rng) const {
    return explore ? act_epsilon(obs, eps, rng) : act_greedy(obs);
}

double DqnAgent::value_of(std::span<const double> obs, int action) const {
    return q_values(obs)[action];
}

double DqnAgent::cvar_of(std::span<const double>, int) const {
    throw std::logic_error("DqnAgent has no cost critic");
}

double DqnAgent::update(std::span<const Transition* const> batch, Rng&) {
    if (batch.empty()) throw std::invalid_argument("DqnAgent::update: empty batch");
    const std::vector<double> targets = dqn_td_target(batch, target_, cfg_.discount);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    GradientSet grads = zero_gradients(online_);
    ForwardCache cache;
    std::vector<double> out_grad(n_actions_, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = *batch[i];
        const std::vector<double> q = forward(online_, t.obs, &cache);
        const double err = q[t.action] - targets[i];
        loss += err * err * inv_batch;
        std::fill(out_grad.begin(), out_grad.end(), 0.0);
        out_grad[t.action] = 2.0 * err * inv_batch;
        backward_accumulate(online_, cache, out_grad, grads);
    }
    adam_step(online_, grads, adam_, cfg_.learning_rate);
    updates_done_ += 1;
    apply_target_update();
    return loss;
}

void DqnAgent::apply_target_update() {
    if (cfg_.target_update_period > 0) {
        if (updates_done_ % cfg_.target_update_period == 0) target_ = online_;
    } else {
        soft_update(target_, online_, cfg_.tau);
    }
}

void DqnAgent::reset(int depth, Rng& rng) {
    const int layers = online_.layer_count();
    if (depth < 0 || depth >= layers) {
        reset_layers(online_, adam_, layers, rng);
        target_ = online_;
        updates_done_ = 0;
        return;
    }
    reset_layers(online_, adam_, depth, rng);
    copy_tail_layers(target_, online_, depth);
}

SafeAcAgent::SafeAcAgent(int obs_dim, int n_actions, SafeAcConfig cfg, Rng& init_rng)
    : cfg_(std::move(cfg)), n_actions_(n_actions), lambda_(cfg_.lambda_init) {
    if (!(cfg_.risk_level > 0.0 && cfg_.risk_level <= 1.0))
        throw std::invalid_argument("SafeAcAgent: risk_level must lie in (0, 1]");
    const std::vector<int> dims = full_dims(obs_dim, cfg_.hidden, n_actions);
    actor_ = mlp_init(dims, init_rng);
    reward_critic_ = mlp_init(dims, init_rng);
    cost_mean_critic_ = mlp_init(dims, init_rng);
    cost_std_critic_ = mlp_init(dims, init_rng);
    reward_target_ = reward_critic_;
    cost_mean_target_ = cost_mean_critic_;
    cost_std_target_ = cost_std_critic_;
    actor_adam_ = adam_init(actor_);
    reward_adam_ = adam_init(reward_critic_);
    cost_mean_adam_ = adam_init(cost_mean_critic_);
    cost_std_adam_ = adam_init(cost_std_critic_);
}

std::vector<double> SafeAcAgent::action_probs(std::span<const double> obs) const {
    return softmax(forward(actor_, obs));
}

int SafeAcAgent::act_greedy(std::span<const double> obs) const {
    return argmax_lowest(forward(actor_, obs));
}

int SafeAcAgent::act_sample(std::span<const double> obs, Rng& rng) const {
    return sample_categorical(action_probs(obs), rng);
}

int SafeAcAgent::propose(std::span<const double> obs, bool explore, double /*eps*/, Rng& rng) const {
    return explore ? act_sample(obs, rng) : act_greedy(obs);
}

double SafeAcAgent::value_of(std::span<const double> obs, int action) const {
    return forward(reward_critic_, obs)[action];
}

double SafeAcAgent::cost_mean_value(std::span<const double> obs, int action) const {
    return forward(cost_mean_critic_, obs)[action];
}

double SafeAcAgent::cost_std_value(std::span<const double> obs, int action) const {
    return positive_std(forward(cost_std_critic_, obs)[action]);
}

double SafeAcAgent::cvar_of(std::span<const double> obs, int action) const {
    const double mean = cost_mean_value(obs, action);
    const double sd = cost_std_value(obs, action);
    return cvar(mean, sd * sd, cfg_.risk_level);
}

double SafeAcAgent::update(std::span<const Transition* const> batch, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("SafeAcAgent::update: empty batch");
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    const double gamma = cfg_.discount;

    GradientSet actor_grads = zero_gradients(actor_);
    GradientSet reward_grads = zero_gradients(reward_critic_);
    GradientSet cost_mean_grads = zero_gradients(cost_mean_critic_);
    GradientSet cost_std_grads = zero_gradients(cost_std_critic_);

    losses_ = Losses{};
    double cvar_observed = 0.0;

    ForwardCache reward_cache, cost_mean_cache, cost_std_cache, actor_cache;
    std::vector<double> out_grad(n_actions_, 0.0);

    for (const Transition* item : batch) {
        const Transition& t = *item;

        // Bootstrap action a' ~ actor(s'); drawn for every item so the rng
        // stream advances at a fixed rate.
        const std::vector<double> next_probs = softmax(forward(actor_, t.next_obs));
        const int a_next = sample_categorical(next_probs, rng);

        double y_r = t.reward;
        double y_c = t.cost;
        double m2 = t.cost * t.cost;
        if (!t.done) {
            const double qr_next = forward(reward_target_, t.next_obs)[a_next];
            const double qc_next = forward(cost_mean_target_, t.next_obs)[a_next];
            const double sd_next = positive_std(forward(cost_std_target_, t.next_obs)[a_next]);
            y_r += gamma * qr_next;
            y_c += gamma * qc_next;
            m2 += 2.0 * gamma * t.cost * qc_next + gamma * gamma * (sd_next * sd_next + qc_next * qc_next);
        }

        const std::vector<double> qr = forward(reward_critic_, t.obs, &reward_cache);
        const std::vector<double> qc = forward(cost_mean_critic_, t.obs, &cost_mean_cache);
        const std::vector<double> raw_std = forward(cost_std_critic_, t.obs, &cost_std_cache);

        const double err_r = qr[t.action] - y_r;
        losses_.reward_critic += err_r * err_r * inv_batch;
        std::fill(out_grad.begin(), out_grad.end(), 0.0);
        out_grad[t.action] = 2.0 * err_r * inv_batch;
        backward_accumulate(reward_critic_, reward_cache, out_grad, reward_grads);

        const double err_c = qc[t.action] - y_c;
        losses_.cost_mean += err_c * err_c * inv_batch;
        std::fill(out_grad.begin(), out_grad.end(), 0.0);
        out_grad[t.action] = 2.0 * err_c * inv_batch;
        backward_accumulate(cost_mean_critic_, cost_mean_cache, out_grad, cost_mean_grads);

        // Std target from the second-moment recursion of the discounted
        // cost sum, relative to the current mean estimate.
        const double y_std = std::sqrt(std::max(0.0, m2 - qc[t.action] * qc[t.action]));
        const double sd_here = positive_std(raw_std[t.action]);
        const double err_s = sd_here - y_std;
        losses_.cost_std += err_s * err_s * inv_batch;
        std::fill(out_grad.begin(), out_grad.end(), 0.0);
        out_grad[t.action] = 2.0 * err_s * sd_here * inv_batch;
        backward_accumulate(cost_std_critic_, cost_std_cache, out_grad, cost_std_grads);

        // Actor: exact expectation over the categorical policy of
        // Q_r - lambda * CVaR, plus a small logit L2 penalty.
        const std::vector<double> logits = forward(actor_, t.obs, &actor_cache);
        const std::vector<double> probs = softmax(logits);
        std::vector<double> score(n_actions_);
        double expected_score = 0.0;
        double expected_cvar = 0.0;
        for (int k = 0; k < n_actions_; ++k) {
            const double sd_k = positive_std(raw_std[k]);
            const double cvar_k = cvar(qc[k], sd_k * sd_k, cfg_.risk_level);
            score[k] = qr[k] - lambda_ * cvar_k;
            expected_score += probs[k] * score[k];
            expected_cvar += probs[k] * cvar_k;
        }
        cvar_observed += expected_cvar * inv_batch;
        double penalty = 0.0;
        for (int k = 0; k < n_actions_; ++k) penalty += logits[k] * logits[k];
        losses_.actor += (-expected_score + cfg_.actor_l2 * penalty) * inv_batch;
        for (int k = 0; k < n_actions_; ++k) {
            out_grad[k] = (-probs[k] * (score[k] - expected_score) + 2.0 * cfg_.actor_l2 * logits[k]) *
                          inv_batch;
        }
        backward_accumulate(actor_, actor_cache, out_grad, actor_grads);
    }

    adam_step(reward_critic_, reward_grads, reward_adam_, cfg_.learning_rate);
    adam_step(cost_mean_critic_, cost_mean_grads, cost_mean_adam_, cfg_.learning_rate);
    adam_step(cost_std_critic_, cost_std_grads, cost_std_adam_, cfg_.learning_rate);
    adam_step(actor_, actor_grads, actor_adam_, cfg_.learning_rate);

    lambda_ = std::max(0.0, lambda_ + cfg_.lambda_step * (cvar_observed - cfg_.cost_budget));

    updates_done_ += 1;
    apply_target_updates();
    return losses_.reward_critic + losses_.cost_mean + losses_.cost_std;
}

void SafeAcAgent::apply_target_updates() {
    if (cfg_.target_update_period > 0) {
        if (updates_done_ % cfg_.target_update_period == 0) {
            reward_target_ = reward_critic_;
            cost_mean_target_ = cost_mean_critic_;
            cost_std_target_ = cost_std_critic_;
        }
    } else {
        soft_update(reward_target_, reward_critic_, cfg_.tau);
        soft_update(cost_mean_target_, cost_mean_critic_, cfg_.tau);
        soft_update(cost_std_target_, cost_std_critic_, cfg_.tau);
    }
}

void SafeAcAgent::reset(int depth, Rng& rng) {
    const int layers = actor_.layer_count();
    const bool full = depth < 0 || depth >= layers;
    const int effective = full ? layers : depth;

    reset_layers(actor_, actor_adam_, effective, rng);
    reset_layers(reward_critic_, reward_adam_, effective, rng);
    reset_layers(cost_mean_critic_, cost_mean_adam_, effective, rng);
    reset_layers(cost_std_critic_, cost_std_adam_, effective, rng);

    if (full) {
        reward_target_ = reward_critic_;
        cost_mean_target_ = cost_mean_critic_;
        cost_std_target_ = cost_std_critic_;
        lambda_ = cfg_.lambda_init;
        updates_done_ = 0;
    } else {
        copy_tail_layers(reward_target_, reward_critic_, effective);
        copy_tail_layers(cost_mean_target_, cost_mean_critic_, effective);
        copy_tail_layers(cost_std_target_, cost_std_critic_, effective);
    }
}

}  // namespace rde
