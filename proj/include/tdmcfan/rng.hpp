#pragma once

// Counter-based splittable random streams (Philox4x32-10).
//
// A stream is a (key, block counter) pair; every scalar draw consumes exactly
// one 128-bit block, so a stream's state is 16 bytes and draws are pure
// functions of (key, block).  Child streams are derived by encrypting the
// child index under the parent key in a reserved counter domain, which makes
// ensembles reproducible no matter in which order particles are processed.
//
// Bulk fills (dense two-doubles-per-block layouts) live in simd.hpp and are
// dispatched to the scalar reference kernel or the AVX2 variant; both produce
// bit-identical output.

#include <array>
#include <cstdint>
#include <span>

#include "tdmcfan/det_math.hpp"

namespace tdmcfan {

struct PhiloxBlock {
  std::uint32_t w[4];
};

// One block of Philox4x32 with 10 rounds.
PhiloxBlock philox4x32_10(std::uint64_t key, const std::array<std::uint32_t, 4>& ctr);

namespace rngdomain {
// Counter word 3 tags the purpose of a block so draw counters can never
// collide with child-key derivation under the same key.
inline constexpr std::uint32_t kDraw = 0u;
inline constexpr std::uint32_t kChild = 0x43484c44u;  // "CHLD"
}  // namespace rngdomain

class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed) : key_(seed) {}

  static RngStream from_state(std::uint64_t key, std::uint64_t block) {
    RngStream s;
    s.key_ = key;
    s.block_ = block;
    return s;
  }

  // Independent child stream; children of distinct indices (and of distinct
  // parents) are independent by construction.
  RngStream child(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t block() const { return block_; }
  void skip_blocks(std::uint64_t n) { block_ += n; }

  // Raw block, advances the counter.
  PhiloxBlock next_block();

  // Each of the draws below consumes exactly one block.
  std::uint64_t next_u64();
  double uniform01();   // [0,1), 52-bit
  double uniform_oo();  // (0,1)
  double normal();      // N(0,1), Box-Muller, cosine branch
  double exponential(); // Exp(1)

  // Uniform on (lo, hi); used for offspring tickets.
  double uniform_open(double lo, double hi);

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t key_ = 0;
  std::uint64_t block_ = 0;
};

// The two u64 lanes of a block.
inline std::uint64_t block_u64_lo(const PhiloxBlock& b) {
  return static_cast<std::uint64_t>(b.w[0]) | (static_cast<std::uint64_t>(b.w[1]) << 32);
}
inline std::uint64_t block_u64_hi(const PhiloxBlock& b) {
  return static_cast<std::uint64_t>(b.w[2]) | (static_cast<std::uint64_t>(b.w[3]) << 32);
}

}  // namespace tdmcfan
