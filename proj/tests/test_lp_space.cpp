#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "tdmcfan/lp_space.hpp"
#include "tdmcfan/rng.hpp"

using namespace tdmcfan;
using lp::PointMeasure;
using lp::TaggedPoint;

namespace {

PointMeasure random_measure(RngStream& s, double a, double p, std::size_t max_pts) {
  PointMeasure mu;
  mu.a = a;
  mu.p = p;
  std::size_t n = static_cast<std::size_t>(s.uniform01() * (max_pts + 1));
  for (std::size_t i = 0; i < n; ++i) {
    double x = (s.uniform01() - 0.5) * 4.0;
    double v = -a * x + 0.02 + 2.5 * s.uniform01();
    mu.points.push_back(TaggedPoint::at(x, v, s.uniform01() < 0.3 ? 1 : 0));
  }
  return mu;
}

double brute_force_distance(const PointMeasure& mu, const PointMeasure& nu, double p,
                            double a) {
  std::size_t n = std::max(mu.count(), nu.count());
  std::vector<TaggedPoint> xs = mu.points, ys = nu.points;
  xs.resize(n, TaggedPoint::delta());
  ys.resize(n, TaggedPoint::delta());
  if (n == 0) return 0.0;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += lp::dp(xs[i], ys[perm[i]], p, a);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("distance to the boundary") {
  CHECK(lp::dist_to_boundary(TaggedPoint::at(1.0, -1.0), 1.0) == 0.0);
  CHECK(lp::dist_to_boundary(TaggedPoint::at(0.0, 1.0), 1.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(lp::dist_to_boundary(TaggedPoint::at(3.0, -0.4), 0.0) == doctest::Approx(0.4));
  CHECK(lp::dist_to_boundary(TaggedPoint::delta(), 1.0) == 0.0);
  // barrier-coordinate form differs by the constant sqrt(1+a^2)/a
  double a = 1.7;
  TaggedPoint X = TaggedPoint::at(0.3, 1.1);
  double eu = lp::dist_to_boundary(X, a, lp::BoundaryForm::euclidean);
  double bc = lp::dist_to_boundary(X, a, lp::BoundaryForm::barrier_coordinate);
  CHECK(bc == doctest::Approx(eu * std::sqrt(1.0 + a * a) / a).epsilon(1e-12));
}

TEST_CASE("ground distance dp") {
  TaggedPoint X = TaggedPoint::at(0.0, 1.0, 0);
  CHECK(lp::dp(X, X, 0.5, 1.0) == 0.0);
  CHECK(lp::dp(X, TaggedPoint::delta(), 0.5, 1.0) ==
        doctest::Approx(std::pow(lp::dist_to_boundary(X, 1.0), 0.5)).epsilon(1e-14));
  // cross-generation pairs pay both boundary distances
  TaggedPoint Y = TaggedPoint::at(0.0, 1.0, 1);
  CHECK(lp::dp(X, Y, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  // same generation takes the cheaper of direct vs boundary routes
  TaggedPoint Z = TaggedPoint::at(0.001, 1.0, 0);
  CHECK(lp::dp(X, Z, 1.0, 1.0) == doctest::Approx(0.001).epsilon(1e-10));
}

TEST_CASE("norm consistency: distance to the empty measure") {
  RngStream s(7);
  for (int trial = 0; trial < 40; ++trial) {
    PointMeasure mu = random_measure(s, 1.0, 0.5, 6);
    PointMeasure empty;
    empty.a = 1.0;
    empty.p = 0.5;
    double d = lp::lp_distance(mu, empty, 0.5, 1.0);
    CHECK(std::abs(d - lp::lp_norm(mu)) <= 1e-12);
  }
}

TEST_CASE("assignment equals factorial brute force up to 7 points") {
  RngStream s(99);
  int done = 0;
  for (int trial = 0; trial < 300; ++trial) {
    RngStream t = s.child(trial);
    PointMeasure mu = random_measure(t, 1.0, 0.5, 4);
    PointMeasure nu = random_measure(t, 1.0, 0.5, 3);
    double got = lp::lp_distance(mu, nu, 0.5, 1.0);
    double want = brute_force_distance(mu, nu, 0.5, 1.0);
    CHECK(std::abs(got - want) <= 1e-12);
    ++done;
  }
  CHECK(done == 300);
}

TEST_CASE("metric axioms") {
  RngStream s(123);
  for (int trial = 0; trial < 1000; ++trial) {
    RngStream t = s.child(trial);
    PointMeasure A = random_measure(t, 1.0, 0.5, 5);
    PointMeasure B = random_measure(t, 1.0, 0.5, 5);
    PointMeasure C = random_measure(t, 1.0, 0.5, 5);
    double ab = lp::lp_distance(A, B, 0.5, 1.0);
    double ba = lp::lp_distance(B, A, 0.5, 1.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    double ac = lp::lp_distance(A, C, 0.5, 1.0);
    double cb = lp::lp_distance(C, B, 0.5, 1.0);
    CHECK(ab <= ac + cb + 1e-9);
    CHECK(lp::lp_distance(A, A, 0.5, 1.0) <= 1e-15);
  }
}

TEST_CASE("interpolation endpoints and midpoint") {
  RngStream s(5);
  PointMeasure mu = random_measure(s, 1.0, 0.5, 5);
  PointMeasure nu = random_measure(s, 1.0, 0.5, 5);
  PointMeasure l0 = lp::interpolate(mu, nu, 0.0, 0.5, 1.0);
  PointMeasure l1 = lp::interpolate(mu, nu, 1.0, 0.5, 1.0);
  CHECK(lp::lp_distance(l0, mu, 0.5, 1.0) <= 1e-9);
  CHECK(lp::lp_distance(l1, nu, 0.5, 1.0) <= 1e-9);

  PointMeasure a, b;
  a.a = b.a = 1.0;
  a.p = b.p = 1.0;
  a.points.push_back(TaggedPoint::at(0.0, 2.0, 0));
  b.points.push_back(TaggedPoint::at(1.0, 1.0, 0));
  PointMeasure mid = lp::interpolate(a, b, 0.5, 1.0, 1.0);
  REQUIRE(mid.count() == 1);
  CHECK(mid.points[0].x == doctest::Approx(0.5));
  CHECK(mid.points[0].v == doctest::Approx(1.5));
}

TEST_CASE("interpolation contraction bound") {
  RngStream s(17);
  for (int trial = 0; trial < 100; ++trial) {
    RngStream t = s.child(trial);
    PointMeasure mu = random_measure(t, 1.0, 0.5, 5);
    PointMeasure nu = random_measure(t, 1.0, 0.5, 5);
    double base = lp::lp_distance(mu, nu, 0.5, 1.0);
    double t1 = t.uniform01(), t2 = t.uniform01();
    PointMeasure l1 = lp::interpolate(mu, nu, t1, 0.5, 1.0);
    PointMeasure l2 = lp::interpolate(mu, nu, t2, 0.5, 1.0);
    double d = lp::lp_distance(l1, l2, 0.5, 1.0);
    CHECK(d <= std::pow(std::abs(t1 - t2), 0.5) * base + 1e-9);
  }
}

TEST_CASE("points outside M are rejected") {
  PointMeasure bad;
  bad.a = 1.0;
  bad.p = 0.5;
  bad.points.push_back(TaggedPoint::at(0.0, -0.5, 0));
  PointMeasure empty;
  CHECK_THROWS_AS(lp::lp_distance(bad, empty, 0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lp::dp(TaggedPoint::at(0, 0), TaggedPoint::at(0, 1), 1.5, 1.0),
                  std::invalid_argument);
}

TEST_CASE("csv round trip") {
  RngStream s(3);
  PointMeasure mu = random_measure(s, 1.0, 0.5, 6);
  std::ostringstream os;
  lp::write_csv(os, mu);
  std::istringstream is(os.str());
  PointMeasure back = lp::read_csv(is, 1.0, 0.5);
  REQUIRE(back.count() == mu.count());
  for (std::size_t i = 0; i < mu.count(); ++i) {
    CHECK(back.points[i].x == mu.points[i].x);
    CHECK(back.points[i].v == mu.points[i].v);
    CHECK(back.points[i].generation == mu.points[i].generation);
  }
}

TEST_CASE("solve_assignment on a hand-checked matrix") {
  // costs: optimal is (0->1, 1->0, 2->2) with total 1+2+1 = 4
  std::vector<double> cost = {5, 1, 9,  //
                              2, 8, 7,  //
                              6, 4, 1};
  auto col = lp::solve_assignment(cost, 3);
  double total = 0;
  for (std::size_t i = 0; i < 3; ++i) total += cost[i * 3 + col[i]];
  CHECK(total == doctest::Approx(4.0));
}
