#pragma once

// Underlying Markov dynamics: unit-variance step laws, the rescaled random
// walk y_{(k+1)eps} = y_{k eps} + sqrt(eps) xi, the generic Euler scheme, and
// the direct weighted Monte Carlo estimator that serves as the unbiasedness
// oracle for the branching algorithm.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdmcfan/rng.hpp"
#include "tdmcfan/simd.hpp"

namespace tdmcfan::chain {

enum class StepDist {
  standard_normal,
  rademacher,
  centered_uniform,
  two_sided_exponential,  // Laplace scaled to unit variance
};

simd::StepKind to_step_kind(StepDist d);
std::string step_dist_name(StepDist d);
std::optional<StepDist> step_dist_from_name(const std::string& name);

// One draw of xi ~ nu; consumes one block.
double sample_step(StepDist d, RngStream& rng);

// E exp(s * xi), in closed form.
double step_mgf(StepDist d, double s);
// nu([s, inf)) for s >= 0, in closed form.
double step_tail_geq(StepDist d, double s);

// Chunked bulk generation of steps from one stream; chunk sizes grow from 64
// to 4096 so short-lived consumers do not pay for a full refill.
class StepBuffer {
 public:
  StepBuffer(StepDist d, RngStream& rng)
      : kind_(to_step_kind(d)), rng_(&rng) {}

  double next() {
    if (pos_ == buf_.size()) refill();
    return buf_[pos_++];
  }

 private:
  void refill();

  simd::StepKind kind_;
  RngStream* rng_;
  std::vector<double> buf_;
  std::size_t pos_ = 0;
  std::size_t chunk_ = 64;
};

struct Potential {
  static Potential linear(double slope_a);
  static Potential custom(std::function<double(double)> v);

  double operator()(double x) const { return linear_ ? -a_ * x : fn_(x); }
  // chi(x, y) = V(y) - V(x)
  double chi(double x, double y) const {
    return linear_ ? -a_ * (y - x) : fn_(y) - fn_(x);
  }
  bool is_linear() const { return linear_; }
  double slope() const { return a_; }

 private:
  bool linear_ = true;
  double a_ = 0.0;
  std::function<double(double)> fn_;
};

struct ChainParams {
  double eps = 0.01;
  int dimension = 1;
  // Optional d=1 hooks; null means F = 0 and Sigma = 1.
  std::function<double(double)> drift;
  std::function<double(double)> diffusion;

  bool default_dynamics() const { return !drift && !diffusion; }
  void validate() const {
    if (!(eps > 0.0)) throw std::invalid_argument("ChainParams: eps must be > 0");
    if (dimension < 1) throw std::invalid_argument("ChainParams: dimension must be >= 1");
  }
  // Number of steps for a horizon t; throws if t is not a multiple of eps.
  std::size_t steps_for(double t) const;
};

double euler_step(double state, const ChainParams& params, StepDist d, RngStream& rng);

// Generic d-dimensional hook (smoke-tested only; every quantitative suite
// runs with d = 1, F = 0, Sigma = 1).
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;
using NoiseMap =
    std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;
void euler_step_d(std::span<double> state, double eps, const VectorField& drift,
                  const NoiseMap& sigma, StepDist d, RngStream& rng);

std::vector<double> walk_path(double x0, const ChainParams& params,
                              std::size_t n_steps, StepDist d, RngStream& rng);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

// Direct estimate of <f>_t = E f(y_t) exp(-sum chi); the unbiasedness oracle.
McEstimate weighted_mc_estimate(const std::function<double(double)>& f, double t,
                                std::size_t M, const Potential& potential,
                                const ChainParams& params, StepDist d,
                                RngStream rng);

}  // namespace tdmcfan::chain
