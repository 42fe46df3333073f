#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "tdmcfan/chain.hpp"
#include "tdmcfan/stats.hpp"
#include "tdmcfan/tdmc.hpp"

using namespace tdmcfan;
using chain::StepDist;

TEST_CASE("branch_decision: kill and copy counts") {
  auto d = tdmc::branch_decision(0.5, 0.7, 0.99);
  CHECK(!d.survives);
  CHECK(d.n_offspring == 0);

  auto e = tdmc::branch_decision(std::exp(1.0), 0.3, 0.5);
  CHECK(e.survives);
  CHECK(e.n_offspring == 3);  // floor(e + 0.5) = 3

  auto f = tdmc::branch_decision(0.9, 0.9, 0.0);
  CHECK(f.survives);  // P == theta survives
  CHECK(f.n_offspring == 1);

  CHECK_THROWS_AS(tdmc::branch_decision(0.0, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(tdmc::branch_decision(-1.0, 0.5, 0.5), std::invalid_argument);
}

// One-step mean offspring: E[N 1_survive] = P, by enumeration over the
// (theta, u) unit square at 1e3 x 1e3 midpoints.
TEST_CASE("branch_decision: brute-force expectation over the unit square") {
  for (double P : {0.3, 1.0, 1.7, 2.5}) {
    double acc = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      double theta = (i + 0.5) / n;
      for (int j = 0; j < n; ++j) {
        double u = (j + 0.5) / n;
        auto d = tdmc::branch_decision(P, theta, u);
        if (d.survives) acc += static_cast<double>(d.n_offspring);
      }
    }
    CHECK(std::abs(acc / (double(n) * n) - P) <= 2e-3);
  }
}

TEST_CASE("branch_decision: sampled expectation at P = 0.5") {
  RngStream s(2024);
  const int n = 1000000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double theta = s.uniform_oo();
    double u = s.uniform01();
    auto d = tdmc::branch_decision(0.5, theta, u);
    if (d.survives) acc += static_cast<double>(d.n_offspring);
  }
  double mean = acc / n;
  double se = std::sqrt(0.5 * 0.5 / n);  // Var(Bernoulli(1/2)) = 1/4
  CHECK(std::abs(mean - 0.5) <= 3 * se);
}

TEST_CASE("spawn_tickets") {
  RngStream s(5);
  auto t1 = tdmc::spawn_tickets(1.3, 0.6, 1, s);
  CHECK(t1.size() == 1);
  CHECK(t1[0] == doctest::Approx(0.6 / 1.3).epsilon(1e-15));

  auto t2 = tdmc::spawn_tickets(2.0, 0.5, 3, s);
  CHECK(t2[0] == 0.25);
  for (std::size_t i = 1; i < t2.size(); ++i) {
    CHECK(t2[i] > 0.5);
    CHECK(t2[i] < 1.0);
  }

  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += tdmc::spawn_tickets(2.0, 0.5, 3, s)[1];
  double se = (0.5 / std::sqrt(12.0)) / std::sqrt(double(n));
  CHECK(std::abs(acc / n - 0.75) <= 3 * se);

  CHECK_THROWS_AS(tdmc::spawn_tickets(2.0, 0.5, 0, s), std::invalid_argument);
  CHECK_THROWS_AS(tdmc::spawn_tickets(0.4, 0.5, 1, s), std::invalid_argument);
  CHECK_THROWS_AS(tdmc::spawn_tickets(0.9, 0.5, 2, s), std::logic_error);
}

TEST_CASE("zero potential: pure random walk, population conserved") {
  chain::Potential pot = chain::Potential::linear(0.0);
  chain::ChainParams params;
  params.eps = 0.01;
  tdmc::Ensemble ens = tdmc::make_ensemble(50, 0.0, RngStream(9));
  tdmc::run_to_time(ens, 0.3, pot, params, StepDist::standard_normal);
  CHECK(ens.size() == 50);
  CHECK(ens.stats.births == 0);
  CHECK(ens.stats.deaths == 0);
  CHECK(ens.time == doctest::Approx(0.3));
}

TEST_CASE("boundary ticket: theta = 1 dies exactly on downward steps") {
  chain::Potential pot = chain::Potential::linear(1.0);
  chain::ChainParams params;
  params.eps = 0.01;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    tdmc::Ensemble ens = tdmc::make_ensemble(1, 0.0, RngStream(seed));
    ens.particles[0].theta = 1.0;
    // replay the particle's stream: block 0 was theta0, block 1 is xi
    RngStream ps = RngStream(seed).child(0);
    ps.skip_blocks(1);
    double xi = chain::sample_step(StepDist::standard_normal, ps);
    tdmc::tdmc_step(ens, pot, params, StepDist::standard_normal);
    bool survived = ens.size() >= 1;
    CHECK(survived == (xi >= 0.0));
  }
}

TEST_CASE("tag v is constant along every particle lifetime") {
  chain::Potential pot = chain::Potential::linear(1.0);
  chain::ChainParams params;
  params.eps = 0.01;
  tdmc::Ensemble ens = tdmc::make_ensemble(20, 0.0, RngStream(31));
  std::map<std::uint64_t, double> tag_at_birth;
  for (const auto& p : ens.particles) tag_at_birth[p.lineage] = p.tag(pot);
  for (int k = 0; k < 50; ++k) {
    tdmc::tdmc_step(ens, pot, params, StepDist::standard_normal);
    for (const auto& p : ens.particles) {
      auto it = tag_at_birth.find(p.lineage);
      if (it == tag_at_birth.end()) {
        tag_at_birth[p.lineage] = p.tag(pot);
      } else {
        CHECK(std::abs(p.tag(pot) - it->second) <= 1e-10);
      }
    }
  }
}

TEST_CASE("offspring inherit position and the next generation index") {
  chain::Potential pot = chain::Potential::linear(3.0);  // branch often
  chain::ChainParams params;
  params.eps = 0.05;
  tdmc::Ensemble ens = tdmc::make_ensemble(10, 0.0, RngStream(77));
  for (int k = 0; k < 10; ++k) {
    double t_before = ens.time;
    std::map<std::uint64_t, std::uint32_t> gen_before;
    for (const auto& p : ens.particles) gen_before[p.lineage] = p.generation;
    tdmc::tdmc_step(ens, pot, params, StepDist::standard_normal);
    for (std::size_t i = 0; i < ens.particles.size(); ++i) {
      const auto& p = ens.particles[i];
      if (gen_before.count(p.lineage)) continue;  // survivor
      CHECK(p.birth_time == doctest::Approx(t_before + params.eps));
      CHECK(p.generation >= 1);
      // offspring sits at its parent's new position: the particle before it
      // in the list with one lower generation shares x
      bool found = false;
      for (std::size_t j = i; j-- > 0;) {
        if (ens.particles[j].generation + 1 == p.generation &&
            ens.particles[j].x == p.x) {
          found = true;
          break;
        }
      }
      CHECK(found);
    }
  }
  CHECK(ens.stats.births > 0);
}

TEST_CASE("mean count identity E N_t = E e^{a y_t} against the direct oracle") {
  chain::Potential pot = chain::Potential::linear(1.0);
  chain::ChainParams params;
  params.eps = 0.01;
  RngStream root(404);
  const std::size_t reps = 20000;
  std::vector<double> ns(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    tdmc::Ensemble ens = tdmc::make_ensemble(1, 0.0, root.child(r));
    tdmc::run_to_time(ens, 0.5, pot, params, StepDist::standard_normal);
    ns[r] = static_cast<double>(ens.size());
  }
  auto me = stats::mean_stderr(ns);
  auto oracle = chain::weighted_mc_estimate([](double) { return 1.0; }, 0.5, 100000,
                                            pot, params, StepDist::standard_normal,
                                            root.child(reps + 1));
  double z = stats::z_score(me.mean, me.se, oracle.mean, oracle.stderr_);
  CHECK(std::abs(z) <= 3.0);
}

// Unbiasedness sweep: every observable, every step law, both step sizes.
// Reduced sample sizes; the acceptance suite runs the full-power version.
TEST_CASE("unbiasedness across observables, step laws and step sizes") {
  chain::Potential pot = chain::Potential::linear(1.0);
  const StepDist all[4] = {StepDist::standard_normal, StepDist::rademacher,
                           StepDist::centered_uniform, StepDist::two_sided_exponential};
  struct Obs {
    const char* name;
    double (*fn)(double);
  };
  const Obs obs[3] = {{"one", [](double) { return 1.0; }},
                      {"x", [](double x) { return x; }},
                      {"xsq_clip", [](double x) { return std::min(x * x, 10.0); }}};
  int cell = 0;
  for (double eps : {0.01, 0.002}) {
    chain::ChainParams params;
    params.eps = eps;
    for (StepDist d : all) {
      for (const Obs& f : obs) {
        RngStream root(9000 + cell++);
        auto est = tdmc::run_estimator(f.fn, 0.5, 20, 400, pot, params, d,
                                       root.child(0));
        auto oracle =
            chain::weighted_mc_estimate(f.fn, 0.5, 60000, pot, params, d, root.child(1));
        double z = stats::z_score(est.estimate, est.stderr_, oracle.mean,
                                  oracle.stderr_);
        INFO("eps=", eps, " dist=", chain::step_dist_name(d), " f=", f.name);
        CHECK(std::abs(z) <= 3.5);
      }
    }
  }
}

TEST_CASE("run_estimator exact cases") {
  chain::Potential zero = chain::Potential::linear(0.0);
  chain::ChainParams params;
  params.eps = 0.05;
  auto r0 = tdmc::run_estimator([](double) { return 0.0; }, 0.25, 10, 5, zero, params,
                                StepDist::standard_normal, RngStream(1));
  CHECK(r0.estimate == 0.0);
  auto r1 = tdmc::run_estimator([](double) { return 1.0; }, 0.25, 10, 5, zero, params,
                                StepDist::standard_normal, RngStream(2));
  CHECK(r1.estimate == 1.0);
  CHECK(r1.stderr_ == 0.0);
}

TEST_CASE("population explosion guard raises the distinguished error") {
  chain::Potential pot = chain::Potential::linear(8.0);
  chain::ChainParams params;
  params.eps = 0.04;
  tdmc::Ensemble ens = tdmc::make_ensemble(200, 0.0, RngStream(3), true);
  CHECK_THROWS_AS(
      [&] {
        for (int k = 0; k < 200; ++k)
          tdmc::tdmc_step(ens, pot, params, StepDist::standard_normal, 2000);
      }(),
      tdmc::PopulationExplosion);
}

TEST_CASE("immortal ancestors never die") {
  chain::Potential pot = chain::Potential::linear(1.0);
  chain::ChainParams params;
  params.eps = 0.01;
  tdmc::Ensemble ens = tdmc::make_ensemble(5, 0.0, RngStream(12), true);
  tdmc::run_to_time(ens, 0.5, pot, params, StepDist::standard_normal);
  std::size_t immortals = 0;
  for (const auto& p : ens.particles)
    if (p.immortal()) ++immortals;
  CHECK(immortals == 5);
}

TEST_CASE("offspring rate vanishes identically at a = 0") {
  auto r = tdmc::offspring_rate_experiment(0.0, 0.5, 1.0, 0.01, StepDist::standard_normal,
                                           50, RngStream(4));
  CHECK(r.rate == 0.0);
}

TEST_CASE("offspring rate approaches a/(2 gamma) (coarse-step sanity)") {
  auto r = tdmc::offspring_rate_experiment(1.0, 0.5, 1.0, 4e-3,
                                           StepDist::standard_normal, 400, RngStream(6));
  CHECK(std::abs(r.rate - 1.0) <= 0.2 + 3.0 * r.stderr_);
}

TEST_CASE("replica runs are reproducible") {
  chain::Potential pot = chain::Potential::linear(1.0);
  chain::ChainParams params;
  params.eps = 0.01;
  auto once = tdmc::run_estimator([](double x) { return x * x; }, 0.2, 20, 50, pot,
                                  params, StepDist::standard_normal, RngStream(88));
  auto twice = tdmc::run_estimator([](double x) { return x * x; }, 0.2, 20, 50, pot,
                                   params, StepDist::standard_normal, RngStream(88));
  CHECK(once.estimate == twice.estimate);
  CHECK(once.replica_estimates == twice.replica_estimates);
}
