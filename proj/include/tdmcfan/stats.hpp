#pragma once

// Statistical comparators for the verification harness: z-scores,
// two-sample Kolmogorov-Smirnov, log-log regression slopes, bootstrap CIs.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tdmcfan/rng.hpp"

namespace tdmcfan::stats {

struct MeanErr {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanErr mean_stderr(std::span<const double> xs);

inline double z_score(double m1, double se1, double m2, double se2) {
  double denom = std::sqrt(se1 * se1 + se2 * se2);
  if (denom == 0.0) return m1 == m2 ? 0.0 : std::numeric_limits<double>::infinity();
  return (m1 - m2) / denom;
}

struct KsResult {
  double stat = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0, n2 = 0;
};

// Two-sample KS with the asymptotic p-value (Stephens' small-sample
// correction).  Requires both samples >= 20.
KsResult two_sample_ks(std::span<const double> x, std::span<const double> y);

// Survival function of the Kolmogorov distribution.
double ks_q(double lambda);

struct Slope {
  double slope = 0.0;
  double se = 0.0;
  double intercept = 0.0;
};

// Least-squares slope of log(values) against log(deltas); inputs must be > 0.
Slope loglog_slope(std::span<const double> deltas, std::span<const double> values);
Slope linear_fit(std::span<const double> x, std::span<const double> y);

struct BootstrapCi {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t resamples = 0;
};

BootstrapCi bootstrap_ci(std::span<const double> data,
                         const std::function<double(std::span<const double>)>& statistic,
                         std::size_t resamples, double level, RngStream rng);

double quantile(std::vector<double> xs, double q);

}  // namespace tdmcfan::stats
