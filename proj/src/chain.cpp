#include "tdmcfan/chain.hpp"

#include <cmath>

#include "tdmcfan/det_math.hpp"

namespace tdmcfan::chain {

namespace {
constexpr double kSqrt3 = 1.7320508075688772935;
constexpr double kLaplaceScale = 0.70710678118654752440;  // 1/sqrt(2)
}  // namespace

simd::StepKind to_step_kind(StepDist d) {
  switch (d) {
    case StepDist::standard_normal: return simd::StepKind::normal;
    case StepDist::rademacher: return simd::StepKind::rademacher;
    case StepDist::centered_uniform: return simd::StepKind::uniform;
    case StepDist::two_sided_exponential: return simd::StepKind::laplace;
  }
  throw std::logic_error("unknown StepDist");
}

std::string step_dist_name(StepDist d) {
  switch (d) {
    case StepDist::standard_normal: return "standard-normal";
    case StepDist::rademacher: return "rademacher";
    case StepDist::centered_uniform: return "centered-uniform";
    case StepDist::two_sided_exponential: return "two-sided-exponential-normalized";
  }
  return "?";
}

std::optional<StepDist> step_dist_from_name(const std::string& name) {
  if (name == "standard-normal") return StepDist::standard_normal;
  if (name == "rademacher") return StepDist::rademacher;
  if (name == "centered-uniform") return StepDist::centered_uniform;
  if (name == "two-sided-exponential-normalized" || name == "two-sided-exponential")
    return StepDist::two_sided_exponential;
  return std::nullopt;
}

double sample_step(StepDist d, RngStream& rng) {
  // Must stay draw-for-draw identical to the gather/fill kernels.
  switch (d) {
    case StepDist::standard_normal:
      return rng.normal();
    case StepDist::rademacher:
      return (rng.next_u64() >> 63) ? 1.0 : -1.0;
    case StepDist::centered_uniform:
      return rng.uniform01() * (2.0 * kSqrt3) - kSqrt3;
    case StepDist::two_sided_exponential: {
      double u = rng.uniform_oo();
      if (u < 0.5) return kLaplaceScale * detmath::det_log(2.0 * u);
      return -kLaplaceScale * detmath::det_log(2.0 - 2.0 * u);
    }
  }
  throw std::logic_error("unknown StepDist");
}

double step_mgf(StepDist d, double s) {
  switch (d) {
    case StepDist::standard_normal:
      return std::exp(0.5 * s * s);
    case StepDist::rademacher:
      return std::cosh(s);
    case StepDist::centered_uniform:
      if (s == 0.0) return 1.0;
      return std::sinh(s * kSqrt3) / (s * kSqrt3);
    case StepDist::two_sided_exponential: {
      double b2 = 0.5;  // b^2 with b = 1/sqrt(2)
      if (s * s * b2 >= 1.0)
        throw std::domain_error("step_mgf: Laplace MGF diverges for |s| >= sqrt(2)");
      return 1.0 / (1.0 - s * s * b2);
    }
  }
  throw std::logic_error("unknown StepDist");
}

double step_tail_geq(StepDist d, double s) {
  if (s < 0.0) throw std::invalid_argument("step_tail_geq: s must be >= 0");
  switch (d) {
    case StepDist::standard_normal:
      return 0.5 * std::erfc(s / std::sqrt(2.0));
    case StepDist::rademacher:
      return s <= 1.0 ? 0.5 : 0.0;
    case StepDist::centered_uniform:
      return s >= kSqrt3 ? 0.0 : (kSqrt3 - s) / (2.0 * kSqrt3);
    case StepDist::two_sided_exponential:
      return 0.5 * std::exp(-s / kLaplaceScale);
  }
  throw std::logic_error("unknown StepDist");
}

void StepBuffer::refill() {
  buf_.resize(chunk_);
  simd::fill_steps(kind_, *rng_, buf_);
  pos_ = 0;
  if (chunk_ < 4096) chunk_ *= 2;
}

Potential Potential::linear(double slope_a) {
  Potential p;
  p.linear_ = true;
  p.a_ = slope_a;
  return p;
}

Potential Potential::custom(std::function<double(double)> v) {
  Potential p;
  p.linear_ = false;
  p.fn_ = std::move(v);
  return p;
}

std::size_t ChainParams::steps_for(double t) const {
  validate();
  double k = std::round(t / eps);
  if (k < 0 || std::abs(k * eps - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::invalid_argument("time " + std::to_string(t) +
                                " is not an integer multiple of eps");
  return static_cast<std::size_t>(k);
}

double euler_step(double state, const ChainParams& params, StepDist d, RngStream& rng) {
  params.validate();
  double xi = sample_step(d, rng);
  double drift = params.drift ? params.drift(state) : 0.0;
  double sigma = params.diffusion ? params.diffusion(state) : 1.0;
  return state + params.eps * drift + std::sqrt(params.eps) * sigma * xi;
}

void euler_step_d(std::span<double> state, double eps, const VectorField& drift,
                  const NoiseMap& sigma, StepDist d, RngStream& rng) {
  std::size_t n = state.size();
  std::vector<double> xi(n), fx(n, 0.0), sx(n);
  for (std::size_t i = 0; i < n; ++i) xi[i] = sample_step(d, rng);
  if (drift) drift(state, fx);
  if (sigma) {
    sigma(state, xi, sx);
  } else {
    sx.assign(xi.begin(), xi.end());
  }
  double se = std::sqrt(eps);
  for (std::size_t i = 0; i < n; ++i) state[i] += eps * fx[i] + se * sx[i];
}

std::vector<double> walk_path(double x0, const ChainParams& params,
                              std::size_t n_steps, StepDist d, RngStream& rng) {
  params.validate();
  std::vector<double> path(n_steps + 1);
  path[0] = x0;
  if (n_steps == 0) return path;
  std::vector<double> xi(n_steps);
  simd::fill_steps(to_step_kind(d), rng, xi);
  double se = std::sqrt(params.eps);
  for (std::size_t k = 0; k < n_steps; ++k) path[k + 1] = path[k] + se * xi[k];
  return path;
}

McEstimate weighted_mc_estimate(const std::function<double(double)>& f, double t,
                                std::size_t M, const Potential& potential,
                                const ChainParams& params, StepDist d,
                                RngStream rng) {
  if (M < 2) throw std::invalid_argument("weighted_mc_estimate: M must be >= 2");
  std::size_t n_steps = params.steps_for(t);
  if (!params.default_dynamics())
    throw std::invalid_argument("weighted_mc_estimate: only F=0, Sigma=1 dynamics");

  double se = std::sqrt(params.eps);
  double sum = 0.0, sumsq = 0.0;
  std::vector<double> xi(n_steps);
  for (std::size_t i = 0; i < M; ++i) {
    RngStream s = rng.child(i);
    double y = 0.0;
    double logw = 0.0;
    if (n_steps > 0) {
      simd::fill_steps(to_step_kind(d), s, xi);
      if (potential.is_linear()) {
        // chi telescopes: sum chi = V(y_t) - V(y_0) = -a * y_t
        for (std::size_t k = 0; k < n_steps; ++k) y += se * xi[k];
        logw = potential.slope() * y;
      } else {
        for (std::size_t k = 0; k < n_steps; ++k) {
          double ynext = y + se * xi[k];
          logw -= potential.chi(y, ynext);
          y = ynext;
        }
      }
    }
    double val = f(y) * std::exp(logw);
    sum += val;
    sumsq += val * val;
  }
  double mean = sum / static_cast<double>(M);
  double var = (sumsq - static_cast<double>(M) * mean * mean) /
               (static_cast<double>(M) - 1.0);
  if (var < 0.0) var = 0.0;
  return McEstimate{mean, std::sqrt(var / static_cast<double>(M)), M};
}

}  // namespace tdmcfan::chain
