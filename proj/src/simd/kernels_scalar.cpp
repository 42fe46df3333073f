// Scalar reference kernels.  These define the semantics; the AVX2 variants
// must reproduce them bit for bit.

#include <cmath>

#include "tdmcfan/det_math.hpp"
#include "tdmcfan/rng.hpp"
#include "tdmcfan/simd.hpp"

namespace tdmcfan::simd {

namespace {

using detmath::det_exp;
using detmath::det_log;
using detmath::det_sincos;
using detmath::u64_to_open_unit;
using detmath::u64_to_unit;

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kTwoSqrt3 = 3.4641016151377545871;
constexpr double kLaplaceScale = 0.70710678118654752440;  // 1/sqrt(2), unit variance

inline void boxmuller(std::uint64_t lo, std::uint64_t hi, double* z0, double* z1) {
  double u1 = u64_to_open_unit(lo);
  double u2 = u64_to_unit(hi);
  double r = std::sqrt(-2.0 * det_log(u1));
  double s, c;
  det_sincos(detmath::kTwoPi * u2, &s, &c);
  *z0 = r * c;
  *z1 = r * s;
}

inline double step_from_u64(StepKind kind, std::uint64_t a) {
  switch (kind) {
    case StepKind::rademacher:
      return (a >> 63) ? 1.0 : -1.0;
    case StepKind::uniform:
      return u64_to_unit(a) * kTwoSqrt3 - kSqrt3;
    case StepKind::laplace: {
      double u = u64_to_open_unit(a);
      if (u < 0.5) return kLaplaceScale * det_log(2.0 * u);
      return -kLaplaceScale * det_log(2.0 - 2.0 * u);
    }
    default:
      return 0.0;  // normal handled separately
  }
}

void fill_uniform01_scalar(std::uint64_t key, std::uint64_t block0, double* out,
                           std::size_t n) {
  std::size_t i = 0;
  std::uint64_t blk = block0;
  while (i < n) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(blk),
                                        static_cast<std::uint32_t>(blk >> 32), 0u,
                                        rngdomain::kDraw};
    PhiloxBlock b = philox4x32_10(key, ctr);
    ++blk;
    out[i++] = u64_to_unit(block_u64_lo(b));
    if (i < n) out[i++] = u64_to_unit(block_u64_hi(b));
  }
}

void fill_normal_scalar(std::uint64_t key, std::uint64_t block0, double* out,
                        std::size_t n) {
  std::size_t i = 0;
  std::uint64_t blk = block0;
  while (i < n) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(blk),
                                        static_cast<std::uint32_t>(blk >> 32), 0u,
                                        rngdomain::kDraw};
    PhiloxBlock b = philox4x32_10(key, ctr);
    ++blk;
    double z0, z1;
    boxmuller(block_u64_lo(b), block_u64_hi(b), &z0, &z1);
    out[i++] = z0;
    if (i < n) out[i++] = z1;
  }
}

void fill_steps_scalar(StepKind kind, std::uint64_t key, std::uint64_t block0,
                       double* out, std::size_t n) {
  if (kind == StepKind::normal) {
    fill_normal_scalar(key, block0, out, n);
    return;
  }
  std::size_t i = 0;
  std::uint64_t blk = block0;
  while (i < n) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(blk),
                                        static_cast<std::uint32_t>(blk >> 32), 0u,
                                        rngdomain::kDraw};
    PhiloxBlock b = philox4x32_10(key, ctr);
    ++blk;
    out[i++] = step_from_u64(kind, block_u64_lo(b));
    if (i < n) out[i++] = step_from_u64(kind, block_u64_hi(b));
  }
}

void gather_steps_scalar(StepKind kind, const std::uint64_t* keys,
                         const std::uint64_t* blocks, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(blocks[i]),
                                        static_cast<std::uint32_t>(blocks[i] >> 32),
                                        0u, rngdomain::kDraw};
    PhiloxBlock b = philox4x32_10(keys[i], ctr);
    if (kind == StepKind::normal) {
      double z0, z1;
      boxmuller(block_u64_lo(b), block_u64_hi(b), &z0, &z1);
      out[i] = z0;
    } else {
      out[i] = step_from_u64(kind, block_u64_lo(b));
    }
  }
}

void gather_uniform01_scalar(const std::uint64_t* keys, const std::uint64_t* blocks,
                             double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(blocks[i]),
                                        static_cast<std::uint32_t>(blocks[i] >> 32),
                                        0u, rngdomain::kDraw};
    PhiloxBlock b = philox4x32_10(keys[i], ctr);
    out[i] = u64_to_unit(block_u64_lo(b));
  }
}

void vexp_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = det_exp(in[i]);
}

void exp_step_weights_scalar(double a, const double* xold, const double* xnew,
                             double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = det_exp(a * (xnew[i] - xold[i]));
}

void axpy_scalar(double alpha, const double* x, const double* y, double* out,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + alpha * x[i];
}

void norm3_scalar(const double* x, const double* y, const double* z, double* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::sqrt((x[i] * x[i] + y[i] * y[i]) + z[i] * z[i]);
}

std::size_t first_ge_scalar(const double* v, std::size_t n, double thr) {
  for (std::size_t i = 0; i < n; ++i)
    if (v[i] >= thr) return i;
  return n;
}

std::size_t first_le_scalar(const double* v, std::size_t n, double thr) {
  for (std::size_t i = 0; i < n; ++i)
    if (v[i] <= thr) return i;
  return n;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table = {
      fill_uniform01_scalar, fill_normal_scalar,      fill_steps_scalar,
      gather_steps_scalar,   gather_uniform01_scalar, vexp_scalar,
      exp_step_weights_scalar, axpy_scalar,           norm3_scalar,
      first_ge_scalar,       first_le_scalar,
  };
  return table;
}

}  // namespace tdmcfan::simd
