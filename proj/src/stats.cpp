#include "tdmcfan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdmcfan::stats {

MeanErr mean_stderr(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("mean_stderr: need >= 2 samples");
  double sum = 0.0;
  for (double x : xs) sum += x;
  double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double var = ss / (static_cast<double>(xs.size()) - 1.0);
  return MeanErr{mean, std::sqrt(var / static_cast<double>(xs.size())), xs.size()};
}

double ks_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  double q = 2.0 * sum;
  return std::clamp(q, 0.0, 1.0);
}

KsResult two_sample_ks(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 20 || y.size() < 20)
    throw std::invalid_argument("two_sample_ks: need >= 20 samples per side");
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }
  double ne = n1 * n2 / (n1 + n2);
  double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  return KsResult{d, ks_q(lambda), a.size(), b.size()};
}

Slope linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("linear_fit: need matching arrays of >= 3 points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  double slope = sxy / sxx;
  double intercept = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (intercept + slope * x[i]);
    rss += r * r;
  }
  double se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  return Slope{slope, se, intercept};
}

Slope loglog_slope(std::span<const double> deltas, std::span<const double> values) {
  if (deltas.size() != values.size())
    throw std::invalid_argument("loglog_slope: size mismatch");
  std::vector<double> lx(deltas.size()), ly(values.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0) || !(values[i] > 0.0))
      throw std::invalid_argument("loglog_slope: inputs must be strictly positive");
    lx[i] = std::log(deltas[i]);
    ly[i] = std::log(values[i]);
  }
  return linear_fit(lx, ly);
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  double pos = q * (static_cast<double>(xs.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

BootstrapCi bootstrap_ci(std::span<const double> data,
                         const std::function<double(std::span<const double>)>& statistic,
                         std::size_t resamples, double level, RngStream rng) {
  if (resamples < 1000)
    throw std::invalid_argument("bootstrap_ci: resamples must be >= 1000");
  if (data.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");
  BootstrapCi out;
  out.point = statistic(data);
  out.resamples = resamples;
  std::vector<double> stats(resamples);
  std::vector<double> scratch(data.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    RngStream s = rng.child(r);
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::size_t idx = static_cast<std::size_t>(s.uniform01() * data.size());
      if (idx >= data.size()) idx = data.size() - 1;
      scratch[i] = data[idx];
    }
    stats[r] = statistic(scratch);
  }
  double alpha = (1.0 - level) / 2.0;
  out.lo = quantile(stats, alpha);
  out.hi = quantile(std::move(stats), 1.0 - alpha);
  return out;
}

}  // namespace tdmcfan::stats
