#pragma once

#include <span>
#include <vector>

namespace rde {

// Numerically stable softmax (max-shifted). Entries are in (0, 1] and sum
// to 1 within 1e-12. Throws std::invalid_argument on empty or non-finite
// input.
std::vector<double> softmax(std::span<const double> logits);

// Standard normal density.
double normal_pdf(double x);

// Standard normal CDF, absolute error below 1e-10.
double normal_cdf(double x);

// Inverse standard normal CDF for p in (0, 1). Rational approximation
// refined by one Newton step; |Phi(quantile(p)) - p| < 1e-8 on
// p in [1e-6, 1 - 1e-6]. Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

}  // namespace rde
