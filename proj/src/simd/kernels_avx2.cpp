// AVX2 kernel variants.  Each kernel mirrors the scalar reference operation
// sequence exactly (no fma, same rounding at every element), so outputs are
// bit-identical to kernels_scalar.cpp; test_simd_kernels.cpp memcmps them.

#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstring>

#include "tdmcfan/det_math.hpp"
#include "tdmcfan/rng.hpp"
#include "tdmcfan/simd.hpp"

namespace tdmcfan::simd {

const KernelTable& scalar_kernels();

namespace {

namespace dm = tdmcfan::detmath;

constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kTwoSqrt3 = 3.4641016151377545871;
constexpr double kLaplaceScale = 0.70710678118654752440;

inline __m256i splat64(std::uint64_t v) {
  return _mm256_set1_epi64x(static_cast<long long>(v));
}

// ---------------------------------------------------------------------------
// Philox4x32-10, four blocks wide (one block per 64-bit lane position).
// Words are kept in the low 32 bits of each 64-bit lane; the dirty upper bits
// produced by the key adds are ignored by mul_epu32 and masked on extraction.
// ---------------------------------------------------------------------------

struct Philox4 {
  __m256i x0, x1, x2, x3;
};

inline void philox4_rounds(Philox4& s, __m256i k0, __m256i k1) {
  const __m256i m0 = splat64(0xD2511F53u);
  const __m256i m1 = splat64(0xCD9E8D57u);
  const __m256i w0 = splat64(0x9E3779B9u);
  const __m256i w1 = splat64(0xBB67AE85u);
  for (int r = 0; r < 10; ++r) {
    __m256i p0 = _mm256_mul_epu32(m0, s.x0);
    __m256i p1 = _mm256_mul_epu32(m1, s.x2);
    __m256i hi0 = _mm256_srli_epi64(p0, 32);
    __m256i lo0 = _mm256_and_si256(p0, splat64(0xFFFFFFFFu));
    __m256i hi1 = _mm256_srli_epi64(p1, 32);
    __m256i lo1 = _mm256_and_si256(p1, splat64(0xFFFFFFFFu));
    __m256i y0 = _mm256_xor_si256(_mm256_xor_si256(hi1, s.x1), k0);
    __m256i y2 = _mm256_xor_si256(_mm256_xor_si256(hi0, s.x3), k1);
    s.x0 = y0;
    s.x1 = lo1;
    s.x2 = y2;
    s.x3 = lo0;
    k0 = _mm256_add_epi64(k0, w0);
    k1 = _mm256_add_epi64(k1, w1);
  }
}

// Returns the two u64 halves of four blocks: a = w0|w1<<32, b = w2|w3<<32.
inline void philox4_u64(const Philox4& s, __m256i* a, __m256i* b) {
  const __m256i lo32 = splat64(0xFFFFFFFFu);
  *a = _mm256_or_si256(_mm256_and_si256(s.x0, lo32),
                       _mm256_slli_epi64(_mm256_and_si256(s.x1, lo32), 32));
  *b = _mm256_or_si256(_mm256_and_si256(s.x2, lo32),
                       _mm256_slli_epi64(_mm256_and_si256(s.x3, lo32), 32));
}

inline Philox4 philox4_consecutive(std::uint64_t key, std::uint64_t block0) {
  const __m256i lane = _mm256_set_epi64x(3, 2, 1, 0);
  __m256i blk = _mm256_add_epi64(splat64(block0), lane);
  Philox4 s;
  s.x0 = _mm256_and_si256(blk, splat64(0xFFFFFFFFu));
  s.x1 = _mm256_srli_epi64(blk, 32);
  s.x2 = _mm256_setzero_si256();
  s.x3 = splat64(rngdomain::kDraw);
  philox4_rounds(s, splat64(static_cast<std::uint32_t>(key)),
                 splat64(static_cast<std::uint32_t>(key >> 32)));
  return s;
}

// Two independent 4-block groups advanced in lockstep so the multiply
// latency chains overlap.
inline void philox8_consecutive(std::uint64_t key, std::uint64_t block0, Philox4* a,
                                Philox4* b) {
  const __m256i lane = _mm256_set_epi64x(3, 2, 1, 0);
  const __m256i lo32 = splat64(0xFFFFFFFFu);
  __m256i blk_a = _mm256_add_epi64(splat64(block0), lane);
  __m256i blk_b = _mm256_add_epi64(splat64(block0 + 4), lane);
  a->x0 = _mm256_and_si256(blk_a, lo32);
  a->x1 = _mm256_srli_epi64(blk_a, 32);
  a->x2 = _mm256_setzero_si256();
  a->x3 = splat64(rngdomain::kDraw);
  b->x0 = _mm256_and_si256(blk_b, lo32);
  b->x1 = _mm256_srli_epi64(blk_b, 32);
  b->x2 = _mm256_setzero_si256();
  b->x3 = splat64(rngdomain::kDraw);
  const __m256i m0 = splat64(0xD2511F53u);
  const __m256i m1 = splat64(0xCD9E8D57u);
  const __m256i w0 = splat64(0x9E3779B9u);
  const __m256i w1 = splat64(0xBB67AE85u);
  __m256i k0 = splat64(static_cast<std::uint32_t>(key));
  __m256i k1 = splat64(static_cast<std::uint32_t>(key >> 32));
  for (int r = 0; r < 10; ++r) {
    __m256i pa0 = _mm256_mul_epu32(m0, a->x0);
    __m256i pb0 = _mm256_mul_epu32(m0, b->x0);
    __m256i pa1 = _mm256_mul_epu32(m1, a->x2);
    __m256i pb1 = _mm256_mul_epu32(m1, b->x2);
    __m256i ya0 = _mm256_xor_si256(
        _mm256_xor_si256(_mm256_srli_epi64(pa1, 32), a->x1), k0);
    __m256i yb0 = _mm256_xor_si256(
        _mm256_xor_si256(_mm256_srli_epi64(pb1, 32), b->x1), k0);
    __m256i ya2 = _mm256_xor_si256(
        _mm256_xor_si256(_mm256_srli_epi64(pa0, 32), a->x3), k1);
    __m256i yb2 = _mm256_xor_si256(
        _mm256_xor_si256(_mm256_srli_epi64(pb0, 32), b->x3), k1);
    a->x0 = ya0;
    a->x1 = _mm256_and_si256(pa1, lo32);
    a->x2 = ya2;
    a->x3 = _mm256_and_si256(pa0, lo32);
    b->x0 = yb0;
    b->x1 = _mm256_and_si256(pb1, lo32);
    b->x2 = yb2;
    b->x3 = _mm256_and_si256(pb0, lo32);
    k0 = _mm256_add_epi64(k0, w0);
    k1 = _mm256_add_epi64(k1, w1);
  }
}

inline Philox4 philox4_gathered(const std::uint64_t* keys, const std::uint64_t* blocks) {
  alignas(32) std::uint64_t c0[4], c1[4], k0[4], k1[4];
  for (int i = 0; i < 4; ++i) {
    c0[i] = static_cast<std::uint32_t>(blocks[i]);
    c1[i] = static_cast<std::uint32_t>(blocks[i] >> 32);
    k0[i] = static_cast<std::uint32_t>(keys[i]);
    k1[i] = static_cast<std::uint32_t>(keys[i] >> 32);
  }
  Philox4 s;
  s.x0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(c0));
  s.x1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(c1));
  s.x2 = _mm256_setzero_si256();
  s.x3 = splat64(rngdomain::kDraw);
  philox4_rounds(s, _mm256_load_si256(reinterpret_cast<const __m256i*>(k0)),
                 _mm256_load_si256(reinterpret_cast<const __m256i*>(k1)));
  return s;
}

// ---------------------------------------------------------------------------
// Vector counterparts of det_math.hpp (same operation order).
// ---------------------------------------------------------------------------

inline __m256d v_u64_to_unit(__m256i a) {
  const __m256d two52 = _mm256_set1_pd(0x1p52);
  __m256i sh = _mm256_srli_epi64(a, 12);
  __m256d d = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(sh, _mm256_castpd_si256(two52))), two52);
  return _mm256_mul_pd(d, _mm256_set1_pd(0x1p-52));
}

inline __m256d v_u64_to_open_unit(__m256i a) {
  const __m256d two52 = _mm256_set1_pd(0x1p52);
  __m256i sh = _mm256_srli_epi64(a, 12);
  __m256d d = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(sh, _mm256_castpd_si256(two52))), two52);
  return _mm256_mul_pd(_mm256_add_pd(d, _mm256_set1_pd(0.5)),
                       _mm256_set1_pd(0x1p-52));
}

// double(int64) for |v| < 2^51, exact
inline __m256d v_i64_to_pd(__m256i v) {
  const __m256d shift = _mm256_set1_pd(dm::kShift);
  __m256i biased = _mm256_add_epi64(v, _mm256_castpd_si256(shift));
  return _mm256_sub_pd(_mm256_castsi256_pd(biased), shift);
}

inline __m256d v_exp(__m256d x) {
  const __m256d shift = _mm256_set1_pd(dm::kShift);
  __m256d xc = _mm256_max_pd(x, _mm256_set1_pd(dm::kExpLoClamp));
  xc = _mm256_min_pd(xc, _mm256_set1_pd(dm::kExpHiClamp));
  __m256d t = _mm256_add_pd(_mm256_mul_pd(xc, _mm256_set1_pd(dm::kLog2E)), shift);
  __m256i k = _mm256_sub_epi64(_mm256_castpd_si256(t), _mm256_castpd_si256(shift));
  __m256d kd = _mm256_sub_pd(t, shift);
  __m256d r = _mm256_sub_pd(xc, _mm256_mul_pd(kd, _mm256_set1_pd(dm::kLn2Hi)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(kd, _mm256_set1_pd(dm::kLn2Lo)));
  __m256d p = _mm256_set1_pd(dm::kExpPoly[10]);
  for (int i = 9; i >= 0; --i)
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(dm::kExpPoly[i]));
  __m256d rr = _mm256_mul_pd(r, r);
  __m256d res = _mm256_add_pd(_mm256_set1_pd(1.0),
                              _mm256_add_pd(r, _mm256_mul_pd(rr, p)));
  __m256d k1d = _mm256_floor_pd(_mm256_mul_pd(kd, _mm256_set1_pd(0.5)));
  __m256i k1 = _mm256_sub_epi64(
      _mm256_castpd_si256(_mm256_add_pd(k1d, shift)), _mm256_castpd_si256(shift));
  __m256i k2 = _mm256_sub_epi64(k, k1);
  const __m256i bias = splat64(1023);
  __m256d s1 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(k1, bias), 52));
  __m256d s2 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(k2, bias), 52));
  return _mm256_mul_pd(_mm256_mul_pd(res, s1), s2);
}

inline __m256d v_log(__m256d x) {
  const __m256i mant = splat64(0x000fffffffffffffULL);
  const __m256i onebits = splat64(0x3ff0000000000000ULL);
  __m256i bits = _mm256_castpd_si256(x);
  __m256i e = _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), splat64(1023));
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant), onebits));
  __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(dm::kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_add_epi64(
      e, _mm256_and_si256(_mm256_castpd_si256(big), splat64(1)));
  __m256d s = _mm256_div_pd(_mm256_sub_pd(m, _mm256_set1_pd(1.0)),
                            _mm256_add_pd(m, _mm256_set1_pd(1.0)));
  __m256d s2 = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(dm::kLogPoly[9]);
  for (int i = 8; i >= 0; --i)
    p = _mm256_add_pd(_mm256_mul_pd(p, s2), _mm256_set1_pd(dm::kLogPoly[i]));
  __m256d logm = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), s), p);
  __m256d ed = v_i64_to_pd(e);
  return _mm256_add_pd(
      _mm256_mul_pd(ed, _mm256_set1_pd(dm::kLn2Hi)),
      _mm256_add_pd(logm, _mm256_mul_pd(ed, _mm256_set1_pd(dm::kLn2Lo))));
}

inline void v_sincos(__m256d x, __m256d* sout, __m256d* cout) {
  const __m256d shift = _mm256_set1_pd(dm::kShift);
  __m256d t = _mm256_add_pd(_mm256_mul_pd(x, _mm256_set1_pd(dm::kTwoOverPi)), shift);
  __m256i k = _mm256_sub_epi64(_mm256_castpd_si256(t), _mm256_castpd_si256(shift));
  __m256d kd = _mm256_sub_pd(t, shift);
  __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(kd, _mm256_set1_pd(dm::kPio2Hi)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(kd, _mm256_set1_pd(dm::kPio2Mid)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(kd, _mm256_set1_pd(dm::kPio2Lo)));
  __m256d r2 = _mm256_mul_pd(r, r);
  __m256d sp = _mm256_set1_pd(dm::kSinPoly[5]);
  for (int i = 4; i >= 0; --i)
    sp = _mm256_add_pd(_mm256_mul_pd(sp, r2), _mm256_set1_pd(dm::kSinPoly[i]));
  __m256d cp = _mm256_set1_pd(dm::kCosPoly[5]);
  for (int i = 4; i >= 0; --i)
    cp = _mm256_add_pd(_mm256_mul_pd(cp, r2), _mm256_set1_pd(dm::kCosPoly[i]));
  __m256d sr = _mm256_add_pd(r, _mm256_mul_pd(_mm256_mul_pd(r, r2), sp));
  __m256d cr = _mm256_add_pd(
      _mm256_sub_pd(_mm256_set1_pd(1.0), _mm256_mul_pd(_mm256_set1_pd(0.5), r2)),
      _mm256_mul_pd(_mm256_mul_pd(r2, r2), cp));
  __m256i bit0 = _mm256_and_si256(k, splat64(1));
  __m256i bit1 = _mm256_and_si256(k, splat64(2));
  __m256d swap = _mm256_castsi256_pd(_mm256_cmpeq_epi64(bit0, splat64(1)));
  __m256d s = _mm256_blendv_pd(sr, cr, swap);
  __m256d c = _mm256_blendv_pd(cr, sr, swap);
  const __m256d signbit = _mm256_set1_pd(-0.0);
  __m256d m1 = _mm256_castsi256_pd(_mm256_cmpeq_epi64(bit1, splat64(2)));
  // sin negative for quadrants 2,3; cos negative for quadrants 1,2
  __m256d ssign = _mm256_and_pd(m1, signbit);
  __m256d csign = _mm256_and_pd(_mm256_xor_pd(swap, m1), signbit);
  *sout = _mm256_xor_pd(s, ssign);
  *cout = _mm256_xor_pd(c, csign);
}

inline void v_boxmuller(__m256i a, __m256i b, __m256d* z0, __m256d* z1) {
  __m256d u1 = v_u64_to_open_unit(a);
  __m256d u2 = v_u64_to_unit(b);
  __m256d r = _mm256_sqrt_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), v_log(u1)));
  __m256d s, c;
  v_sincos(_mm256_mul_pd(_mm256_set1_pd(dm::kTwoPi), u2), &s, &c);
  *z0 = _mm256_mul_pd(r, c);
  *z1 = _mm256_mul_pd(r, s);
}

inline __m256d v_step(StepKind kind, __m256i a) {
  switch (kind) {
    case StepKind::rademacher: {
      __m256i top = _mm256_srli_epi64(a, 63);
      __m256d pos = _mm256_castsi256_pd(_mm256_cmpeq_epi64(top, splat64(1)));
      return _mm256_blendv_pd(_mm256_set1_pd(-1.0), _mm256_set1_pd(1.0), pos);
    }
    case StepKind::uniform: {
      __m256d u = v_u64_to_unit(a);
      return _mm256_sub_pd(_mm256_mul_pd(u, _mm256_set1_pd(kTwoSqrt3)),
                           _mm256_set1_pd(kSqrt3));
    }
    case StepKind::laplace: {
      __m256d u = v_u64_to_open_unit(a);
      __m256d lower = _mm256_cmp_pd(u, _mm256_set1_pd(0.5), _CMP_LT_OQ);
      __m256d t = _mm256_mul_pd(_mm256_set1_pd(2.0), u);
      __m256d arg = _mm256_blendv_pd(_mm256_sub_pd(_mm256_set1_pd(2.0), t), t, lower);
      __m256d l = _mm256_mul_pd(_mm256_set1_pd(kLaplaceScale), v_log(arg));
      return _mm256_blendv_pd(_mm256_xor_pd(l, _mm256_set1_pd(-0.0)), l, lower);
    }
    default:
      return _mm256_setzero_pd();
  }
}

// interleave (a0..a3),(b0..b3) -> (a0,b0,a1,b1) and (a2,b2,a3,b3)
inline void interleave2(__m256d a, __m256d b, __m256d* lo, __m256d* hi) {
  __m256d u = _mm256_unpacklo_pd(a, b);  // a0,b0,a2,b2
  __m256d v = _mm256_unpackhi_pd(a, b);  // a1,b1,a3,b3
  *lo = _mm256_permute2f128_pd(u, v, 0x20);
  *hi = _mm256_permute2f128_pd(u, v, 0x31);
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

void fill_uniform01_avx2(std::uint64_t key, std::uint64_t block0, double* out,
                         std::size_t n) {
  std::uint64_t blk = block0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16, blk += 8) {
    Philox4 s1, s2;
    philox8_consecutive(key, blk, &s1, &s2);
    __m256i a, b;
    __m256d lo, hi;
    philox4_u64(s1, &a, &b);
    interleave2(v_u64_to_unit(a), v_u64_to_unit(b), &lo, &hi);
    _mm256_storeu_pd(out + i, lo);
    _mm256_storeu_pd(out + i + 4, hi);
    philox4_u64(s2, &a, &b);
    interleave2(v_u64_to_unit(a), v_u64_to_unit(b), &lo, &hi);
    _mm256_storeu_pd(out + i + 8, lo);
    _mm256_storeu_pd(out + i + 12, hi);
  }
  if (i < n) scalar_kernels().fill_uniform01(key, blk, out + i, n - i);
}

void fill_normal_avx2(std::uint64_t key, std::uint64_t block0, double* out,
                      std::size_t n) {
  std::uint64_t blk = block0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16, blk += 8) {
    Philox4 s1, s2;
    philox8_consecutive(key, blk, &s1, &s2);
    __m256i a, b;
    __m256d z0, z1, lo, hi;
    philox4_u64(s1, &a, &b);
    v_boxmuller(a, b, &z0, &z1);
    interleave2(z0, z1, &lo, &hi);
    _mm256_storeu_pd(out + i, lo);
    _mm256_storeu_pd(out + i + 4, hi);
    philox4_u64(s2, &a, &b);
    v_boxmuller(a, b, &z0, &z1);
    interleave2(z0, z1, &lo, &hi);
    _mm256_storeu_pd(out + i + 8, lo);
    _mm256_storeu_pd(out + i + 12, hi);
  }
  if (i < n) scalar_kernels().fill_normal(key, blk, out + i, n - i);
}

void fill_steps_avx2(StepKind kind, std::uint64_t key, std::uint64_t block0,
                     double* out, std::size_t n) {
  if (kind == StepKind::normal) {
    fill_normal_avx2(key, block0, out, n);
    return;
  }
  std::uint64_t blk = block0;
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16, blk += 8) {
    Philox4 s1, s2;
    philox8_consecutive(key, blk, &s1, &s2);
    __m256i a, b;
    __m256d lo, hi;
    philox4_u64(s1, &a, &b);
    interleave2(v_step(kind, a), v_step(kind, b), &lo, &hi);
    _mm256_storeu_pd(out + i, lo);
    _mm256_storeu_pd(out + i + 4, hi);
    philox4_u64(s2, &a, &b);
    interleave2(v_step(kind, a), v_step(kind, b), &lo, &hi);
    _mm256_storeu_pd(out + i + 8, lo);
    _mm256_storeu_pd(out + i + 12, hi);
  }
  if (i < n) scalar_kernels().fill_steps(kind, key, blk, out + i, n - i);
}

void gather_steps_avx2(StepKind kind, const std::uint64_t* keys,
                       const std::uint64_t* blocks, double* out, std::size_t n) {
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    Philox4 s = philox4_gathered(keys + i, blocks + i);
    __m256i a, b;
    philox4_u64(s, &a, &b);
    if (kind == StepKind::normal) {
      __m256d z0, z1;
      v_boxmuller(a, b, &z0, &z1);
      _mm256_storeu_pd(out + i, z0);
    } else {
      _mm256_storeu_pd(out + i, v_step(kind, a));
    }
  }
  if (i < n) scalar_kernels().gather_steps(kind, keys + i, blocks + i, out + i, n - i);
}

void gather_uniform01_avx2(const std::uint64_t* keys, const std::uint64_t* blocks,
                           double* out, std::size_t n) {
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    Philox4 s = philox4_gathered(keys + i, blocks + i);
    __m256i a, b;
    philox4_u64(s, &a, &b);
    _mm256_storeu_pd(out + i, v_u64_to_unit(a));
  }
  if (i < n) scalar_kernels().gather_uniform01(keys + i, blocks + i, out + i, n - i);
}

void vexp_avx2(const double* in, double* out, std::size_t n) {
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) _mm256_storeu_pd(out + i, v_exp(_mm256_loadu_pd(in + i)));
  if (i < n) scalar_kernels().vexp(in + i, out + i, n - i);
}

void exp_step_weights_avx2(double a, const double* xold, const double* xnew,
                           double* out, std::size_t n) {
  __m256d av = _mm256_set1_pd(a);
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(xnew + i), _mm256_loadu_pd(xold + i));
    _mm256_storeu_pd(out + i, v_exp(_mm256_mul_pd(av, d)));
  }
  if (i < n) scalar_kernels().exp_step_weights(a, xold + i, xnew + i, out + i, n - i);
}

void axpy_avx2(double alpha, const double* x, const double* y, double* out,
               std::size_t n) {
  __m256d av = _mm256_set1_pd(alpha);
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                            _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  }
  if (i < n) scalar_kernels().axpy(alpha, x + i, y + i, out + i, n - i);
}

void norm3_avx2(const double* x, const double* y, const double* z, double* out,
                std::size_t n) {
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d yv = _mm256_loadu_pd(y + i);
    __m256d zv = _mm256_loadu_pd(z + i);
    __m256d s = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(xv, xv), _mm256_mul_pd(yv, yv)),
        _mm256_mul_pd(zv, zv));
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(s));
  }
  if (i < n) scalar_kernels().norm3(x + i, y + i, z + i, out + i, n - i);
}

std::size_t first_ge_avx2(const double* v, std::size_t n, double thr) {
  __m256d t = _mm256_set1_pd(thr);
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(v + i), t, _CMP_GE_OQ);
    int mask = _mm256_movemask_pd(cmp);
    if (mask != 0) return i + static_cast<std::size_t>(std::countr_zero(
                                  static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i)
    if (v[i] >= thr) return i;
  return n;
}

std::size_t first_le_avx2(const double* v, std::size_t n, double thr) {
  __m256d t = _mm256_set1_pd(thr);
  std::size_t nfull = n / 4 * 4;
  std::size_t i = 0;
  for (; i < nfull; i += 4) {
    __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(v + i), t, _CMP_LE_OQ);
    int mask = _mm256_movemask_pd(cmp);
    if (mask != 0) return i + static_cast<std::size_t>(std::countr_zero(
                                  static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i)
    if (v[i] <= thr) return i;
  return n;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table = {
      fill_uniform01_avx2, fill_normal_avx2,      fill_steps_avx2,
      gather_steps_avx2,   gather_uniform01_avx2, vexp_avx2,
      exp_step_weights_avx2, axpy_avx2,           norm3_avx2,
      first_ge_avx2,       first_le_avx2,
  };
  return table;
}

}  // namespace tdmcfan::simd
