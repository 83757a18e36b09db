#include "rde/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace rde {

namespace {

constexpr double kNormFloor = 1e-8;

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("selection: non-finite value estimate");
        m = std::max(m, std::abs(v));
    }
    return std::max(m, kNormFloor);
}

}  // namespace

std::vector<double> selection_probs(std::span<const double> q_hat, double beta,
                                    TemperatureMode mode) {
    if (q_hat.empty()) throw std::invalid_argument("selection_probs: empty input");
    std::vector<double> logits(q_hat.size());
    if (mode == TemperatureMode::AsPrinted) {
        double max_signed = q_hat[0];
        for (double v : q_hat) {
            if (!std::isfinite(v)) throw std::invalid_argument("selection_probs: non-finite input");
            max_signed = std::max(max_signed, v);
        }
        if (beta == 0.0)
            throw std::invalid_argument("selection_probs: as-printed temperature needs beta != 0");
        const double alpha = beta / (max_signed != 0.0 ? max_signed : kNormFloor);
        for (std::size_t i = 0; i < q_hat.size(); ++i) logits[i] = q_hat[i] / alpha;
    } else {
        const double scale = beta / max_abs(q_hat);
        for (std::size_t i = 0; i < q_hat.size(); ++i) logits[i] = scale * q_hat[i];
    }
    return softmax(logits);
}

std::vector<double> safe_selection_probs(std::span<const double> c_hat, double beta) {
    if (c_hat.empty()) throw std::invalid_argument("safe_selection_probs: empty input");
    const double scale = -beta / max_abs(c_hat);
    std::vector<double> logits(c_hat.size());
    for (std::size_t i = 0; i < c_hat.size(); ++i) logits[i] = scale * c_hat[i];
    return softmax(logits);
}

std::vector<double> mix_safe(std::span<const double> p_reward, std::span<const double> p_cost,
                             double kappa) {
    if (p_reward.size() != p_cost.size())
        throw std::invalid_argument("mix_safe: length mismatch");
    if (!(kappa >= 0.0 && kappa <= 1.0))
        throw std::invalid_argument("mix_safe: kappa must lie in [0, 1]");
    std::vector<double> out(p_reward.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = kappa * p_reward[i] + (1.0 - kappa) * p_cost[i];
    return out;
}

}  // namespace rde
