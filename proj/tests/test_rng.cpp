#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "tdmcfan/det_math.hpp"
#include "tdmcfan/rng.hpp"

using namespace tdmcfan;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors from the Random123 test suite.
  {
    PhiloxBlock b = philox4x32_10(0, {0u, 0u, 0u, 0u});
    CHECK(b.w[0] == 0x6627e8d5u);
    CHECK(b.w[1] == 0xe169c58du);
    CHECK(b.w[2] == 0xbc57ac4cu);
    CHECK(b.w[3] == 0x9b00dbd8u);
  }
  {
    PhiloxBlock b = philox4x32_10(0xffffffffffffffffULL,
                                  {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    CHECK(b.w[0] == 0x408f276du);
    CHECK(b.w[1] == 0x41c83b0eu);
    CHECK(b.w[2] == 0xa20bc7c6u);
    CHECK(b.w[3] == 0x6d5451fdu);
  }
  {
    std::uint64_t key = 0xa4093822ULL | (0x299f31d0ULL << 32);
    PhiloxBlock b = philox4x32_10(key, {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u});
    CHECK(b.w[0] == 0xd16cfe09u);
    CHECK(b.w[1] == 0x94fdccebu);
    CHECK(b.w[2] == 0x5001e420u);
    CHECK(b.w[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are deterministic and draws consume one block each") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.block() == 100);
  a.uniform01();
  a.normal();
  a.exponential();
  CHECK(a.block() == 103);
}

TEST_CASE("child streams differ from parents and from siblings") {
  RngStream root(7);
  std::set<std::uint64_t> keys;
  keys.insert(root.key());
  for (std::uint64_t i = 0; i < 1000; ++i) keys.insert(root.child(i).key());
  CHECK(keys.size() == 1001);
  // child derivation is independent of the parent's draw position
  RngStream r2(7);
  r2.skip_blocks(17);
  CHECK(r2.child(3).key() == root.child(3).key());
}

TEST_CASE("uniform draws land in the right intervals") {
  RngStream s(1);
  for (int i = 0; i < 10000; ++i) {
    double u = s.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = s.uniform_oo();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("normal moments at Monte Carlo accuracy") {
  RngStream s(20240601);
  const int n = 1'000'000;
  double sum = 0, sum2 = 0, sum4 = 0;
  for (int i = 0; i < n; ++i) {
    double z = s.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  double kurt = sum4 / n;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));          // se of mean = 1/sqrt(n)
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));       // se of var ~ sqrt(2/n)
  CHECK(std::abs(kurt - 3.0) < 5.0 * std::sqrt(96.0 / n));     // Var z^4 = 96
}

TEST_CASE("deterministic exp/log/sincos track libm well below MC noise") {
  RngStream s(5);
  double max_exp = 0, max_log = 0, max_sin = 0;
  for (int i = 0; i < 200000; ++i) {
    double x = (s.uniform01() - 0.5) * 80.0;
    double e1 = detmath::det_exp(x);
    double e2 = std::exp(x);
    max_exp = std::max(max_exp, std::abs(e1 - e2) / e2);

    double u = s.uniform_oo();
    max_log = std::max(max_log, std::abs(detmath::det_log(u) - std::log(u)));

    double ang = s.uniform01() * detmath::kTwoPi;
    double sn, cs;
    detmath::det_sincos(ang, &sn, &cs);
    max_sin = std::max({max_sin, std::abs(sn - std::sin(ang)), std::abs(cs - std::cos(ang))});
  }
  CHECK(max_exp < 1e-13);
  CHECK(max_log < 1e-12);
  CHECK(max_sin < 1e-13);
}

TEST_CASE("exponential draw has unit mean") {
  RngStream s(99);
  const int n = 400000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += s.exponential();
  CHECK(std::abs(sum / n - 1.0) < 5.0 / std::sqrt(double(n)));
}
