#pragma once

// Runtime-dispatched data-parallel kernels for the throughput-bound inner
// loops: bulk variate generation, Euler sweeps, weight exponentials and
// first-passage scans.
//
// Every kernel has a scalar reference implementation (kernels_scalar.cpp)
// that defines the semantics, and an AVX2 variant (kernels_avx2.cpp) that is
// required to be bit-identical to it; tests/test_simd_kernels.cpp enforces
// this with memcmp.  Dispatch picks AVX2 when the CPU supports it; the
// TDMCFAN_SIMD environment variable ("scalar", "avx2", "auto") overrides.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "tdmcfan/rng.hpp"

namespace tdmcfan::simd {

enum class Backend { scalar, avx2 };

Backend active_backend();
// Returns false if the requested backend is unavailable on this machine.
bool force_backend(Backend b);
std::string backend_name(Backend b);

enum class StepKind : int { normal = 0, rademacher = 1, uniform = 2, laplace = 3 };

struct KernelTable {
  // Dense layouts, two values per Philox block, blocks starting at block0.
  void (*fill_uniform01)(std::uint64_t key, std::uint64_t block0, double* out,
                         std::size_t n);
  void (*fill_normal)(std::uint64_t key, std::uint64_t block0, double* out,
                      std::size_t n);
  void (*fill_steps)(StepKind kind, std::uint64_t key, std::uint64_t block0,
                     double* out, std::size_t n);

  // One draw per lane, one block per lane; equals the RngStream scalar draws.
  void (*gather_steps)(StepKind kind, const std::uint64_t* keys,
                       const std::uint64_t* blocks, double* out, std::size_t n);
  void (*gather_uniform01)(const std::uint64_t* keys, const std::uint64_t* blocks,
                           double* out, std::size_t n);

  void (*vexp)(const double* in, double* out, std::size_t n);
  // out[i] = exp(a * (xnew[i] - xold[i]))  -- the linear-potential weight sweep
  void (*exp_step_weights)(double a, const double* xold, const double* xnew,
                           double* out, std::size_t n);
  // out[i] = y[i] + alpha * x[i]
  void (*axpy)(double alpha, const double* x, const double* y, double* out,
               std::size_t n);
  void (*norm3)(const double* x, const double* y, const double* z, double* out,
                std::size_t n);
  std::size_t (*first_ge)(const double* v, std::size_t n, double thr);
  std::size_t (*first_le)(const double* v, std::size_t n, double thr);
};

const KernelTable& kernels();
const KernelTable& kernels_for(Backend b);

inline std::uint64_t blocks_for(std::size_t n) { return (n + 1) / 2; }

// Stream-advancing conveniences.
inline void fill_uniform01(RngStream& s, std::span<double> out) {
  kernels().fill_uniform01(s.key(), s.block(), out.data(), out.size());
  s.skip_blocks(blocks_for(out.size()));
}
inline void fill_normal(RngStream& s, std::span<double> out) {
  kernels().fill_normal(s.key(), s.block(), out.data(), out.size());
  s.skip_blocks(blocks_for(out.size()));
}
inline void fill_steps(StepKind kind, RngStream& s, std::span<double> out) {
  kernels().fill_steps(kind, s.key(), s.block(), out.data(), out.size());
  s.skip_blocks(blocks_for(out.size()));
}

}  // namespace tdmcfan::simd
