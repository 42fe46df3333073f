#pragma once

// Deterministic elementary functions used by both the scalar reference
// kernels and the SIMD variants.  These are NOT correctly-rounded libm
// replacements: accuracy is ~2 ulp, which is far below the Monte Carlo
// noise floor everywhere they are used.  What they buy is a fixed IEEE
// operation sequence per element, so a scalar call and a SIMD lane produce
// bit-identical results and simulation output does not depend on which
// backend the dispatcher picked.
//
// Any change here must be mirrored in src/simd/kernels_avx2.cpp.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace tdmcfan::detmath {

inline constexpr double kLog2E = 1.4426950408889634074;
inline constexpr double kShift = 6755399441055744.0;  // 1.5 * 2^52
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpLoClamp = -745.0;
inline constexpr double kExpHiClamp = 709.0;

// exp(r) = 1 + r + r^2 * P(r), Taylor, |r| <= ln(2)/2
inline constexpr double kExpPoly[11] = {
    1.0 / 2.0,       1.0 / 6.0,        1.0 / 24.0,       1.0 / 120.0,
    1.0 / 720.0,     1.0 / 5040.0,     1.0 / 40320.0,    1.0 / 362880.0,
    1.0 / 3628800.0, 1.0 / 39916800.0, 1.0 / 479001600.0};

// log(m) = 2 s * Q(s^2), s = (m-1)/(m+1), m in [sqrt(2)/2, sqrt(2)]
inline constexpr double kLogPoly[10] = {
    1.0,         1.0 / 3.0,  1.0 / 5.0,  1.0 / 7.0,  1.0 / 9.0,
    1.0 / 11.0,  1.0 / 13.0, 1.0 / 15.0, 1.0 / 17.0, 1.0 / 19.0};

inline constexpr double kSqrt2 = 1.4142135623730951;

inline constexpr double kTwoOverPi = 0.63661977236758134308;
// pi/2 split into three parts, each with trailing mantissa zeros, so that
// k*piHi etc. are exact for the small k used here.
inline constexpr double kPio2Hi = 1.57079632673412561417e+00;
inline constexpr double kPio2Mid = 6.07710050630396597660e-11;
inline constexpr double kPio2Lo = 2.02226624879595063154e-21;

// sin(r) ~ r + r^3 * S(r^2), cos(r) ~ 1 - r^2/2 + r^4 * C(r^2)  (fdlibm)
inline constexpr double kSinPoly[6] = {
    -1.66666666666666324348e-01, 8.33333333332248946124e-03,
    -1.98412698298579493134e-04, 2.75573137070700676789e-06,
    -2.50507602534068634195e-08, 1.58969099521155010221e-10};
inline constexpr double kCosPoly[6] = {
    4.16666666666666019037e-02,  -1.38888888888741095749e-03,
    2.48015872894767294178e-05,  -2.75573143513906633035e-07,
    2.08757232129817482790e-09,  -1.13596475577881948265e-11};

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double pow2i(std::int64_t k) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(k + 1023) << 52);
}

inline double det_exp(double x) {
  double xc = x;
  if (xc < kExpLoClamp) xc = kExpLoClamp;
  if (xc > kExpHiClamp) xc = kExpHiClamp;
  double t = xc * kLog2E + kShift;
  std::int64_t k = static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(t) -
                                             std::bit_cast<std::uint64_t>(kShift));
  double kd = t - kShift;
  double r = xc - kd * kLn2Hi;
  r = r - kd * kLn2Lo;
  double p = kExpPoly[10];
  for (int i = 9; i >= 0; --i) p = p * r + kExpPoly[i];
  double res = 1.0 + (r + (r * r) * p);
  // split the 2^k scale in two so subnormal results stay representable
  double k1d = std::floor(kd * 0.5);
  std::int64_t k1 = static_cast<std::int64_t>(k1d);
  std::int64_t k2 = k - k1;
  return res * pow2i(k1) * pow2i(k2);
}

// x must be strictly positive, finite and normal (all callers draw from
// open-interval uniforms, so the smallest input is 2^-53).
inline double det_log(double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  std::int64_t e = static_cast<std::int64_t>(bits >> 52) - 1023;
  double m = std::bit_cast<double>((bits & 0x000fffffffffffffULL) |
                                   0x3ff0000000000000ULL);
  if (m > kSqrt2) {
    m = m * 0.5;
    e = e + 1;
  }
  double s = (m - 1.0) / (m + 1.0);
  double s2 = s * s;
  double p = kLogPoly[9];
  for (int i = 8; i >= 0; --i) p = p * s2 + kLogPoly[i];
  double logm = (2.0 * s) * p;
  double ed = static_cast<double>(e);
  return ed * kLn2Hi + (logm + ed * kLn2Lo);
}

// Argument range [0, 2pi); used for Box-Muller angles only.
inline void det_sincos(double x, double* sout, double* cout) {
  double t = x * kTwoOverPi + kShift;
  std::int64_t k = static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(t) -
                                             std::bit_cast<std::uint64_t>(kShift));
  double kd = t - kShift;
  double r = x - kd * kPio2Hi;
  r = r - kd * kPio2Mid;
  r = r - kd * kPio2Lo;
  double r2 = r * r;
  double sp = kSinPoly[5];
  for (int i = 4; i >= 0; --i) sp = sp * r2 + kSinPoly[i];
  double cp = kCosPoly[5];
  for (int i = 4; i >= 0; --i) cp = cp * r2 + kCosPoly[i];
  double sr = r + (r * r2) * sp;
  double cr = 1.0 - 0.5 * r2 + (r2 * r2) * cp;
  switch (k & 3) {
    case 0: *sout = sr;  *cout = cr;  break;
    case 1: *sout = cr;  *cout = -sr; break;
    case 2: *sout = -sr; *cout = -cr; break;
    default: *sout = -cr; *cout = sr; break;
  }
}

// 52-bit uniforms; the same mapping is implemented vectorised.
inline double u64_to_unit(std::uint64_t a) {
  return static_cast<double>(a >> 12) * 0x1p-52;
}
inline double u64_to_open_unit(std::uint64_t a) {
  return (static_cast<double>(a >> 12) + 0.5) * 0x1p-52;
}

}  // namespace tdmcfan::detmath
