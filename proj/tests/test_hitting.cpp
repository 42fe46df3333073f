#include <doctest.h>

#include <cmath>
#include <vector>

#include "tdmcfan/hitting.hpp"
#include "tdmcfan/stats.hpp"

using namespace tdmcfan;
using chain::StepDist;

TEST_CASE("exact lattice oracle: linear solve vs gambler's ruin closed form") {
  CHECK(hitting::hit_prob_exact_rademacher(1.0, 5) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(hitting::hit_prob_exact_rademacher(0.5, 5) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(hitting::hit_prob_exact_rademacher(2.5, 7) ==
        doctest::Approx(3.0 / 10.0).epsilon(1e-12));
  for (double s : {0.2, 1.0, 1.7, 3.0, 4.5}) {
    for (std::int64_t g : {1, 2, 5, 11}) {
      double sbar = std::ceil(s);
      CHECK(hitting::hit_prob_exact_rademacher(s, g) ==
            doctest::Approx(sbar / (sbar + g)).epsilon(1e-12));
    }
  }
  // s = 0: the start is exempt from the kill test, so P = 1/(2 gamma)
  CHECK(hitting::hit_prob_exact_rademacher(0.0, 5) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(hitting::hit_prob_exact_rademacher(1.0, 0), std::invalid_argument);
}

TEST_CASE("hit_prob_mc agrees with the lattice oracle") {
  for (auto [s, g] : std::vector<std::pair<double, std::int64_t>>{
           {1.0, 5}, {0.5, 3}, {2.5, 7}, {3.0, 4}}) {
    hitting::HittingQuery q{s, double(g), StepDist::rademacher};
    auto hp = hitting::hit_prob_mc(q, 40000, RngStream(100 + g), 1ull << 32);
    double exact = hitting::hit_prob_exact_rademacher(s, g);
    CHECK(std::abs(hp.p - exact) <= 3.0 * hp.stderr_);
  }
}

TEST_CASE("ruin dominates for a huge target") {
  hitting::HittingQuery q{1.0, 1e4, StepDist::rademacher};
  auto hp = hitting::hit_prob_mc(q, 10000, RngStream(7), 1ull << 33);
  CHECK(hp.p < 0.01);
}

TEST_CASE("Brownian regime: P ~ s/(s+gamma) for the normal law") {
  hitting::HittingQuery q{20.0, 100.0, StepDist::standard_normal};
  auto hp = hitting::hit_prob_mc(q, 20000, RngStream(8), 1ull << 33);
  CHECK(std::abs(hp.p - 1.0 / 6.0) <= 3.0 * hp.stderr_ + 0.02);
}

TEST_CASE("step cap raises the distinguished error") {
  hitting::HittingQuery q{1.0, 50.0, StepDist::standard_normal};
  CHECK_THROWS_AS(hitting::hit_prob_mc(q, 1000, RngStream(9), 500),
                  hitting::StepCapExhausted);
}

TEST_CASE("estimate_G: rademacher ceiling value and large-s linearity") {
  std::vector<double> schedule = {8, 16, 32};
  auto g = hitting::estimate_G(2.5, StepDist::rademacher, schedule, 200000,
                               RngStream(11), 1ull << 34);
  CHECK(std::abs(g.g - 3.0) <= 0.1);
  REQUIRE(g.diffs.size() == 2);
  // gamma P sequence is Cauchy: differences shrink along the schedule
  CHECK(std::abs(g.diffs[1]) <= std::abs(g.diffs[0]) + 3.0 * (g.gamma_p_se[1] + g.gamma_p_se[2]));

  auto big = hitting::estimate_G(50.0, StepDist::rademacher, std::vector<double>{50, 100, 200},
                                 8000, RngStream(12), 1ull << 36);
  CHECK(big.g / 50.0 >= 0.9);
  CHECK(big.g / 50.0 <= 1.1);

  CHECK_THROWS_AS(hitting::estimate_G(1.0, StepDist::rademacher,
                                      std::vector<double>{8, 4, 16}, 1000, RngStream(1)),
                  std::invalid_argument);
}

TEST_CASE("G is nondecreasing in s (within MC noise)") {
  std::vector<double> schedule = {8, 16, 32};
  double prev = -1e9, prev_se = 0;
  for (double s : {0.5, 1.5, 3.0}) {
    auto g = hitting::estimate_G(s, StepDist::standard_normal, schedule, 60000,
                                 RngStream(13), 1ull << 34);
    CHECK(g.g >= prev - 3.0 * (g.stderr_ + prev_se));
    prev = g.g;
    prev_se = g.stderr_;
  }
}

TEST_CASE("Cauchy property of gamma P along a geometric schedule, every law") {
  std::vector<double> schedule = {8, 16, 32, 64};
  const StepDist all[4] = {StepDist::standard_normal, StepDist::rademacher,
                           StepDist::centered_uniform, StepDist::two_sided_exponential};
  for (StepDist d : all) {
    auto g = hitting::estimate_G(1.5, d, schedule, 60000,
                                 RngStream(900 + static_cast<int>(d)), 1ull << 34);
    REQUIRE(g.diffs.size() == 3);
    for (std::size_t i = 1; i < g.diffs.size(); ++i) {
      double noise = 3.0 * (g.gamma_p_se[i] + g.gamma_p_se[i + 1] + g.gamma_p_se[i - 1]);
      INFO("dist=", chain::step_dist_name(d), " i=", i);
      CHECK(std::abs(g.diffs[i]) <= std::abs(g.diffs[i - 1]) + noise);
    }
  }
}

TEST_CASE("renewal identity for the rademacher cache and the normal law") {
  {
    hitting::GCache cache = hitting::build_g_cache(StepDist::rademacher, 40000,
                                                   RngStream(21), 4.0, 0.5, 32.0);
    // G(1.5) = 2 vs (G(2.5) + G(0.5))/2 = 2 through the ceiling recursion
    auto rc = hitting::check_renewal(1.5, StepDist::rademacher, cache, 200000,
                                     RngStream(22));
    CHECK(rc.residual <= 3.0 * rc.rhs_se + 0.05);
    auto rc2 = hitting::check_renewal(0.5, StepDist::rademacher, cache, 200000,
                                      RngStream(23));
    CHECK(rc2.residual <= 3.0 * rc2.rhs_se + 0.05);
  }
  {
    hitting::GCache cache = hitting::build_g_cache(StepDist::standard_normal, 20000,
                                                   RngStream(24), 8.0, 0.1, 32.0);
    for (double s : {0.5, 1.0, 2.0}) {
      auto rc = hitting::check_renewal(s, StepDist::standard_normal, cache, 100000,
                                       RngStream(25));
      CHECK(rc.residual <= 3.0 * rc.rhs_se + 0.05);
    }
  }
}

TEST_CASE("half identity: exact rademacher quadrature and MC for the normal law") {
  CHECK(std::abs(hitting::half_identity_rademacher_closed_form() - 0.5) <= 1e-6);

  hitting::GCache cache = hitting::build_g_cache(StepDist::standard_normal, 8000,
                                                 RngStream(31), 8.0, 0.1, 32.0);
  auto hi = hitting::check_half_identity(StepDist::standard_normal, cache);
  CHECK(std::abs(hi.integral - 0.5) <= 0.03);
}

TEST_CASE("conditioned excursions reach gamma and die on schedule") {
  RngStream root(41);
  for (int i = 0; i < 200; ++i) {
    fan::Excursion w = hitting::conditioned_excursion_sample(
        1.0, 0.4, 4e-3, StepDist::standard_normal, root.child(i), 8.0);
    CHECK(w.max_value() >= 0.4);
    CHECK(w.values.front() == doctest::Approx(1.0 * std::sqrt(4e-3)));
    if (!w.clipped) CHECK(w.values.back() < 0.0);
  }
}

TEST_CASE("conditioned excursion retry cap raises the distinguished error") {
  CHECK_THROWS_AS(hitting::conditioned_excursion_sample(1.0, 1e6, 0.01,
                                                        StepDist::standard_normal,
                                                        RngStream(5), 2.0, 20),
                  hitting::RetryCapExhausted);
}
