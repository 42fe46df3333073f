#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tdmcfan/rng.hpp"
#include "tdmcfan/stats.hpp"

using namespace tdmcfan;

TEST_CASE("ks: identical samples give stat 0, p 1") {
  std::vector<double> x(50);
  for (int i = 0; i < 50; ++i) x[i] = i * 0.1;
  auto r = stats::two_sample_ks(x, x);
  CHECK(r.stat == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("ks: undersized samples are rejected") {
  std::vector<double> x(10, 0.0), y(100, 0.0);
  CHECK_THROWS_AS(stats::two_sample_ks(x, y), std::invalid_argument);
}

TEST_CASE("ks: null calibration near the nominal level") {
  RngStream root(2718);
  const std::size_t trials = 500, n = 2000;
  std::vector<double> x(n), y(n);
  std::size_t rejected = 0;
  for (std::size_t tr = 0; tr < trials; ++tr) {
    RngStream s = root.child(tr);
    for (auto& v : x) v = s.uniform01();
    for (auto& v : y) v = s.uniform01();
    if (stats::two_sample_ks(x, y).p_value < 0.01) ++rejected;
  }
  double rate = double(rejected) / double(trials);
  CHECK(rate <= 0.025);  // ~1% nominal; binomial 3.5 sigma upper bound
}

TEST_CASE("ks: power against a 0.2 shift") {
  RngStream s(3141);
  const std::size_t n = 2000;
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = s.uniform01();
  for (auto& v : y) v = s.uniform01() + 0.2;
  auto r = stats::two_sample_ks(x, y);
  CHECK(r.p_value < 1e-6);
}

TEST_CASE("loglog slope exact cases") {
  std::vector<double> d = {0.001, 0.002, 0.004, 0.008, 0.016};
  std::vector<double> v1 = d;
  auto s1 = stats::loglog_slope(d, v1);
  CHECK(s1.slope == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> v2(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) v2[i] = std::sqrt(d[i]);
  auto s2 = stats::loglog_slope(d, v2);
  CHECK(s2.slope == doctest::Approx(0.5).epsilon(1e-12));
  std::vector<double> bad = {1.0, -1.0, 2.0, 1.0, 1.0};
  CHECK_THROWS_AS(stats::loglog_slope(d, bad), std::invalid_argument);
}

TEST_CASE("mean_stderr and quantile") {
  std::vector<double> xs = {1, 2, 3, 4, 5};
  auto m = stats::mean_stderr(xs);
  CHECK(m.mean == doctest::Approx(3.0));
  CHECK(m.se == doctest::Approx(std::sqrt(2.5 / 5.0)));
  CHECK(stats::quantile(xs, 0.5) == doctest::Approx(3.0));
  CHECK(stats::quantile(xs, 0.0) == doctest::Approx(1.0));
  CHECK(stats::quantile(xs, 1.0) == doctest::Approx(5.0));
}

TEST_CASE("bootstrap CI covers the mean of a uniform sample") {
  RngStream s(55);
  std::vector<double> xs(400);
  for (auto& v : xs) v = s.uniform01();
  auto ci = stats::bootstrap_ci(
      xs,
      [](std::span<const double> d) {
        double acc = 0;
        for (double v : d) acc += v;
        return acc / double(d.size());
      },
      1000, 0.95, s.child(1));
  CHECK(ci.lo < ci.point);
  CHECK(ci.point < ci.hi);
  // percentile interval width tracks the normal-theory 95% width
  double se = 1.0 / std::sqrt(12.0) / std::sqrt(400.0);
  CHECK((ci.hi - ci.lo) > 2.0 * se);
  CHECK((ci.hi - ci.lo) < 6.0 * se);
  CHECK_THROWS_AS(stats::bootstrap_ci(
                      xs, [](std::span<const double>) { return 0.0; }, 10, 0.95, s),
                  std::invalid_argument);
}

TEST_CASE("z_score") {
  CHECK(stats::z_score(1.0, 0.1, 1.0, 0.1) == 0.0);
  CHECK(stats::z_score(2.0, 0.3, 1.0, 0.4) == doctest::Approx(2.0));
}
