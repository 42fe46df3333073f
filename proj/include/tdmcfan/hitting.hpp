#pragma once

// First-passage statistics of the unit-step random walk (eps = 1
// normalisation): P_{s,gamma} = P(reach [gamma,inf) before (-inf,-s]), its
// gamma->inf limit G, the renewal and half identities, exact absorbing-chain
// oracles for the +/-1 walk, and conditioned excursion sampling.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdmcfan/chain.hpp"
#include "tdmcfan/fan.hpp"
#include "tdmcfan/rng.hpp"

namespace tdmcfan::hitting {

class StepCapExhausted : public std::runtime_error {
 public:
  explicit StepCapExhausted(std::uint64_t cap)
      : std::runtime_error("hitting: step cap exhausted (" + std::to_string(cap) + ")") {}
};

class RetryCapExhausted : public std::runtime_error {
 public:
  explicit RetryCapExhausted(std::uint64_t cap)
      : std::runtime_error("hitting: rejection retries exhausted (" + std::to_string(cap) + ")") {}
};

struct HittingQuery {
  double s = 1.0;       // lower barrier depth (killed on reaching (-inf,-s])
  double gamma = 8.0;   // upper target (success on reaching [gamma,inf))
  chain::StepDist dist = chain::StepDist::standard_normal;

  void validate() const {
    if (!(s >= 0.0)) throw std::invalid_argument("HittingQuery: s must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("HittingQuery: gamma must be > 0");
  }
};

struct HitProb {
  double p = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::uint64_t kDefaultStepCap = 10'000'000;

HitProb hit_prob_mc(const HittingQuery& q, std::size_t samples, RngStream rng,
                    std::uint64_t step_cap = kDefaultStepCap);

// Absorbing-chain linear solve for the +/-1 walk from the origin; gamma must
// be a positive integer.  The closed form ceil(s)/(ceil(s)+gamma) is the
// cross-check, not the implementation.
double hit_prob_exact_rademacher(double s, std::int64_t gamma);

struct GEstimate {
  double g = 0.0;
  double stderr_ = 0.0;
  std::vector<double> gammas;
  std::vector<double> gamma_p;     // gamma * P_hat along the schedule
  std::vector<double> gamma_p_se;
  std::vector<double> diffs;       // successive differences, expected to shrink
};

GEstimate estimate_G(double s, chain::StepDist dist, std::span<const double> gamma_schedule,
                     std::size_t samples, RngStream rng,
                     std::uint64_t step_cap = kDefaultStepCap);

// G cached on a uniform s-grid with linear interpolation; beyond the grid,
// G(s) ~ s + fitted bias.
struct GCache {
  chain::StepDist dist = chain::StepDist::standard_normal;
  double s_max = 8.0;
  double ds = 0.1;
  double gamma_ref = 32.0;
  std::vector<double> g;
  std::vector<double> se;
  double tail_bias = 0.0;

  double eval(double s) const;
  double eval_se(double s) const;
};

GCache build_g_cache(chain::StepDist dist, std::size_t samples_per_point, RngStream rng,
                     double s_max = 8.0, double ds = 0.1, double gamma_ref = 32.0,
                     std::uint64_t step_cap = kDefaultStepCap);

// Residual of G(s) = int_{-s}^inf G(s+z) nu(dz), estimated with fresh step
// draws against the cache.
struct RenewalCheck {
  double residual = 0.0;
  double g_lhs = 0.0;
  double g_rhs = 0.0;
  double rhs_se = 0.0;
};

RenewalCheck check_renewal(double s, chain::StepDist dist, const GCache& cache,
                           std::size_t samples, RngStream rng);

struct HalfIdentity {
  double integral = 0.0;
  double stderr_ = 0.0;
};

// Trapezoid quadrature of nu([s,inf)) * G_hat(s) over the cache grid (the
// closed-form tail keeps the quadrature free of extra MC error).
HalfIdentity check_half_identity(chain::StepDist dist, const GCache& cache);

// Exact ceiling-form route for the +/-1 walk: fine midpoint quadrature of
// nu([s,inf)) * ceil(s), accurate to ~1e-12.
double half_identity_rademacher_closed_form();

// Rescaled-walk excursion conditioned to reach gamma before R_-, started at
// z*sqrt(eps), run until its first entry into R_- (clipped at horizon).
// retry_cap = 0 selects the default 1000/sqrt(eps).
fan::Excursion conditioned_excursion_sample(double z, double gamma, double eps,
                                            chain::StepDist dist, RngStream rng,
                                            double horizon,
                                            std::uint64_t retry_cap = 0);

}  // namespace tdmcfan::hitting
