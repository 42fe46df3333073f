#include "tdmcfan/rng.hpp"

#include <cmath>

namespace tdmcfan {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWey0 = 0x9E3779B9u;
constexpr std::uint32_t kWey1 = 0xBB67AE85u;

inline void round_once(std::uint32_t x[4], std::uint32_t k0, std::uint32_t k1) {
  std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * x[0];
  std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * x[2];
  std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  std::uint32_t y0 = hi1 ^ x[1] ^ k0;
  std::uint32_t y1 = lo1;
  std::uint32_t y2 = hi0 ^ x[3] ^ k1;
  std::uint32_t y3 = lo0;
  x[0] = y0; x[1] = y1; x[2] = y2; x[3] = y3;
}

}  // namespace

PhiloxBlock philox4x32_10(std::uint64_t key, const std::array<std::uint32_t, 4>& ctr) {
  std::uint32_t x[4] = {ctr[0], ctr[1], ctr[2], ctr[3]};
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int r = 0; r < 10; ++r) {
    round_once(x, k0, k1);
    k0 += kWey0;
    k1 += kWey1;
  }
  return PhiloxBlock{{x[0], x[1], x[2], x[3]}};
}

RngStream RngStream::child(std::uint64_t index) const {
  std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(index),
                                      static_cast<std::uint32_t>(index >> 32), 0u,
                                      rngdomain::kChild};
  PhiloxBlock b = philox4x32_10(key_, ctr);
  return RngStream(block_u64_lo(b));
}

PhiloxBlock RngStream::next_block() {
  std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block_),
                                      static_cast<std::uint32_t>(block_ >> 32), 0u,
                                      rngdomain::kDraw};
  ++block_;
  return philox4x32_10(key_, ctr);
}

std::uint64_t RngStream::next_u64() { return block_u64_lo(next_block()); }

double RngStream::uniform01() { return detmath::u64_to_unit(next_u64()); }

double RngStream::uniform_oo() { return detmath::u64_to_open_unit(next_u64()); }

double RngStream::normal() {
  PhiloxBlock b = next_block();
  double u1 = detmath::u64_to_open_unit(block_u64_lo(b));
  double u2 = detmath::u64_to_unit(block_u64_hi(b));
  double r = std::sqrt(-2.0 * detmath::det_log(u1));
  double s, c;
  detmath::det_sincos(detmath::kTwoPi * u2, &s, &c);
  return r * c;
}

double RngStream::exponential() { return -detmath::det_log(uniform_oo()); }

double RngStream::uniform_open(double lo, double hi) {
  return lo + uniform_oo() * (hi - lo);
}

}  // namespace tdmcfan
