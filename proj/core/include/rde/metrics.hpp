#pragma once

#include <utility>
#include <vector>

namespace rde {

// Interquartile mean: drop floor(n/4) lowest and highest values, mean the
// rest. Throws on empty input.
double iqm(std::vector<double> scores);

struct NormalizedScores {
    std::vector<double> values;
    bool normalized = true;  // false: baseline mean was zero, raw scores returned
};

// Divides each score by the mean of baseline_scores; falls back to raw
// scores (flagged) when the baseline mean is zero.
NormalizedScores normalize_scores(const std::vector<double>& scores,
                                  const std::vector<double>& baseline_scores);

struct CollapseStats {
    struct Drop {
        long reset_step = 0;
        double ratio = 0.0;
    };
    std::vector<Drop> drops;
    int skipped = 0;  // resets lacking surrounding evaluation points
    double max_drop = 0.0;
    double mean_drop = 0.0;
};

// Post-reset drop ratios: for each reset step, pre is the mean of the last
// 3 evaluation points at or before the reset, post_min the minimum of the
// next `window_evals` points after it; ratio = max(0, (pre - post_min) /
// max(pre, 1e-9)). eval_curve is (env_step, value), ascending steps.
CollapseStats collapse_metric(const std::vector<std::pair<long, double>>& eval_curve,
                              const std::vector<long>& reset_steps, int window_evals);

}  // namespace rde
