#pragma once

// Sampler for the truncated branching excursion process: excursions
// conditioned to reach a height gamma (Bessel-3 up, Brownian motion down),
// the Poisson offspring kernel with mass (a/2gamma)|l(w) cap [0,T]|, the
// depth/height-truncated recursion, the evaluation map into point measures,
// particle counts and workload.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdmcfan/lp_space.hpp"
#include "tdmcfan/rng.hpp"

namespace tdmcfan::fan {

class MemoryGuard : public std::runtime_error {
 public:
  explicit MemoryGuard(std::uint64_t n)
      : std::runtime_error("fan: stored samples exceeded guard (" + std::to_string(n) + ")") {}
};

struct Excursion {
  double s = 0.0;  // start time
  double e = 0.0;  // end time; horizon value when clipped
  double h = 1e-4;
  std::vector<double> values;  // on s + k h; values.front() = birth_level
  double birth_level = 0.0;
  double kill_level = 0.0;  // equals birth_level for generations >= 1
  std::uint32_t generation = 0;
  bool clipped = false;  // still alive at the horizon

  double lifetime() const { return e - s; }
  bool alive_at(double t) const { return s < t && (t < e || (clipped && t <= e)); }
  // Linear interpolation on the grid, constant outside [s, e].
  double value_at(double t) const;
  double max_value() const;
};

struct FanParams {
  double a = 1.0;        // intensity slope
  double gamma = 0.1;    // height truncation
  int n_max = 6;         // depth truncation
  double T = 1.0;        // horizon
  double h = 1e-4;       // path grid
  // Ancestor killing depth L below the start: v/a with v ~ Exp(1) by default
  // (matching theta0 ~ U(0,1)); the alternative draws L ~ Exp(mean a).
  bool depth_mean_a = false;
  std::uint64_t sample_guard = 100'000'000;  // total stored path samples
};

struct FanRealization {
  FanParams params;
  double x0 = 0.0;
  double v0 = 0.0;  // ancestor tag actually used
  std::vector<Excursion> excursions;  // ancestor first, then by generation
  std::uint64_t total_samples = 0;
};

// One excursion with the law of the unit excursion measure conditioned to
// reach gamma: Bessel-3 from 0 to its first passage of gamma, then an
// independent Brownian motion run to its first hitting of 0.  The path is
// truncated at t_cap (clipped flag) when finite.
Excursion sample_excursion_geq(double gamma, double h, RngStream rng,
                               double t_cap = std::numeric_limits<double>::infinity());

// Poisson offspring of a parent excursion: K ~ Poisson((a/2gamma)|l(w) cap
// [0,T]|), birth times uniform on l(w) cap [0,T], offspring shifted so their
// origin sits on the parent path.
std::vector<Excursion> sample_kernel(const Excursion& w, double a, double gamma,
                                     double T, double h, RngStream rng);

// Full truncated realization: Brownian ancestor from x killed at -v/a, then
// n_max generations of the kernel.  Passing nullopt for v draws it randomly
// per FanParams::depth_mean_a.
FanRealization sample_fan(double x, std::optional<double> v, const FanParams& params,
                          RngStream rng);

// Evaluation map: alive excursions emit (w_t, -a*kill_level, generation).
lp::PointMeasure evaluate(const FanRealization& fr, double t, double p = 0.5);

std::size_t particle_count(const FanRealization& fr, double t);

struct WorkloadResult {
  std::vector<double> grid;
  std::vector<double> counts;
  std::vector<double> workload;  // trapezoid integral of counts
  double modulus = 0.0;          // max |W(t+d)-W(t)| / (d |log d|), dyadic d
};

WorkloadResult workload(const FanRealization& fr, std::span<const double> time_grid);

// Monte Carlo / quadrature estimate of sup_parents int F dQ(w,.) / F(w) with
// F(w) = e^{-eta s(w)} (1 - e^{-eta |l(w)|}); the kernel contracts when the
// returned ratio is < 1.
double truncation_contraction_check(double a, double eta, std::size_t samples,
                                    RngStream rng);

// Poisson sampler by inversion (chunked for large means).
std::uint64_t poisson_knuth(double mean, RngStream& rng);

// JSON round trip of the documented layout.
std::string to_json(const FanRealization& fr);
FanRealization fan_from_json(const std::string& text);

}  // namespace tdmcfan::fan
