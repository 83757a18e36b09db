#include "rde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rde {

double iqm(std::vector<double> scores) {
    if (scores.empty()) throw std::invalid_argument("iqm: empty input");
    std::sort(scores.begin(), scores.end());
    const std::size_t trim = scores.size() / 4;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = trim; i < scores.size() - trim; ++i) {
        sum += scores[i];
        count += 1;
    }
    return sum / static_cast<double>(count);
}

NormalizedScores normalize_scores(const std::vector<double>& scores,
                                  const std::vector<double>& baseline_scores) {
    if (baseline_scores.empty()) throw std::invalid_argument("normalize_scores: empty baseline");
    double baseline_mean = 0.0;
    for (double v : baseline_scores) baseline_mean += v;
    baseline_mean /= static_cast<double>(baseline_scores.size());

    NormalizedScores out;
    if (baseline_mean == 0.0) {
        out.values = scores;
        out.normalized = false;
        return out;
    }
    out.values.reserve(scores.size());
    for (double v : scores) out.values.push_back(v / baseline_mean);
    return out;
}

CollapseStats collapse_metric(const std::vector<std::pair<long, double>>& eval_curve,
                              const std::vector<long>& reset_steps, int window_evals) {
    if (eval_curve.empty()) throw std::invalid_argument("collapse_metric: empty eval curve");
    if (window_evals < 1) throw std::invalid_argument("collapse_metric: window must be >= 1");

    CollapseStats stats;
    for (long reset_step : reset_steps) {
        // Evaluations run before the reset within the same step, so points
        // at exactly reset_step count as pre-reset.
        std::vector<double> pre_values;
        std::size_t first_after = eval_curve.size();
        for (std::size_t i = 0; i < eval_curve.size(); ++i) {
            if (eval_curve[i].first <= reset_step) {
                pre_values.push_back(eval_curve[i].second);
            } else {
                first_after = i;
                break;
            }
        }
        if (pre_values.empty() || first_after == eval_curve.size()) {
            stats.skipped += 1;
            continue;
        }
        double pre = 0.0;
        const std::size_t take = std::min<std::size_t>(3, pre_values.size());
        for (std::size_t i = pre_values.size() - take; i < pre_values.size(); ++i)
            pre += pre_values[i];
        pre /= static_cast<double>(take);

        double post_min = eval_curve[first_after].second;
        const std::size_t last = std::min(eval_curve.size(), first_after + window_evals);
        for (std::size_t i = first_after; i < last; ++i)
            post_min = std::min(post_min, eval_curve[i].second);

        const double ratio = std::max(0.0, (pre - post_min) / std::max(pre, 1e-9));
        stats.drops.push_back({reset_step, ratio});
    }
    for (const auto& d : stats.drops) {
        stats.max_drop = std::max(stats.max_drop, d.ratio);
        stats.mean_drop += d.ratio;
    }
    if (!stats.drops.empty()) stats.mean_drop /= static_cast<double>(stats.drops.size());
    return stats;
}

}  // namespace rde
