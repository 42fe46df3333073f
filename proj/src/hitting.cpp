#include "tdmcfan/hitting.hpp"

#include <algorithm>
#include <cmath>

namespace tdmcfan::hitting {

HitProb hit_prob_mc(const HittingQuery& q, std::size_t samples, RngStream rng,
                    std::uint64_t step_cap) {
  q.validate();
  if (samples < 100) throw std::invalid_argument("hit_prob_mc: need >= 100 samples");
  std::uint64_t steps_used = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    RngStream s = rng.child(i);
    chain::StepBuffer buf(q.dist, s);
    double pos = 0.0;
    while (true) {
      if (++steps_used > step_cap) throw StepCapExhausted(step_cap);
      pos += buf.next();
      if (pos >= q.gamma) {
        ++hits;
        break;
      }
      if (pos <= -q.s) break;
    }
  }
  double p = static_cast<double>(hits) / static_cast<double>(samples);
  double se = std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return HitProb{p, se, samples};
}

double hit_prob_exact_rademacher(double s, std::int64_t gamma) {
  if (gamma < 1) throw std::invalid_argument("hit_prob_exact_rademacher: gamma must be >= 1");
  if (!(s >= 0.0)) throw std::invalid_argument("hit_prob_exact_rademacher: s must be >= 0");
  std::int64_t sbar = static_cast<std::int64_t>(std::ceil(s));

  // Absorbing +/-1 chain on { -sbar, ..., gamma }: p(-sbar) = 0, p(gamma) = 1,
  // p(x) = (p(x-1) + p(x+1)) / 2 inside.  Thomas solve of the tridiagonal
  // system; the s = 0 start sits on the kill boundary but is exempt at time 0,
  // so the answer is the one-step average.
  std::int64_t lo = -sbar, hi = gamma;
  std::int64_t n = hi - lo - 1;  // interior count
  if (n <= 0) {
    // gamma == 1 and sbar == 0: first step decides
    return sbar == 0 ? 0.5 : 1.0;  // sbar >= 1 cannot give n <= 0 for gamma >= 1
  }
  std::vector<double> diag(n, -2.0), rhs(n, 0.0);
  rhs[n - 1] = -1.0;  // neighbour gamma contributes p = 1
  // forward elimination of the unit off-diagonals
  std::vector<double> c(n, 0.0);
  c[0] = 1.0 / diag[0];
  rhs[0] = rhs[0] / diag[0];
  for (std::int64_t i = 1; i < n; ++i) {
    double m = diag[i] - c[i - 1];
    c[i] = 1.0 / m;
    rhs[i] = (rhs[i] - rhs[i - 1]) / m;
  }
  std::vector<double> p(n);
  p[n - 1] = rhs[n - 1];
  for (std::int64_t i = n - 2; i >= 0; --i) p[i] = rhs[i] - c[i] * p[i + 1];

  auto p_at = [&](std::int64_t x) -> double {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    return p[x - lo - 1];
  };
  if (sbar == 0) return 0.5 * (p_at(1) + 0.0);
  return p_at(0);
}

GEstimate estimate_G(double s, chain::StepDist dist, std::span<const double> gamma_schedule,
                     std::size_t samples, RngStream rng, std::uint64_t step_cap) {
  if (gamma_schedule.size() < 3)
    throw std::invalid_argument("estimate_G: schedule needs >= 3 gammas");
  for (std::size_t i = 1; i < gamma_schedule.size(); ++i)
    if (!(gamma_schedule[i] > gamma_schedule[i - 1]))
      throw std::invalid_argument("estimate_G: schedule must be increasing");
  GEstimate out;
  double last_p = 0.0, last_se = 0.0;
  for (std::size_t i = 0; i < gamma_schedule.size(); ++i) {
    HittingQuery q{s, gamma_schedule[i], dist};
    HitProb hp = hit_prob_mc(q, samples, rng.child(i), step_cap);
    out.gammas.push_back(q.gamma);
    out.gamma_p.push_back(q.gamma * hp.p);
    out.gamma_p_se.push_back(q.gamma * hp.stderr_);
    last_p = hp.p;
    last_se = hp.stderr_;
  }
  for (std::size_t i = 1; i < out.gamma_p.size(); ++i)
    out.diffs.push_back(out.gamma_p[i] - out.gamma_p[i - 1]);
  // the (gamma+s)-corrected form converges at the uniform gamma^{-1/2+d}
  // rate; the plain gamma P sequence is kept as the Cauchy diagnostic
  out.g = (gamma_schedule.back() + s) * last_p;
  out.stderr_ = (gamma_schedule.back() + s) * last_se;
  return out;
}

double GCache::eval(double s) const {
  if (s < 0.0) return 0.0;
  if (s >= s_max) return s + tail_bias;
  double u = s / ds;
  std::size_t k = static_cast<std::size_t>(u);
  if (k + 1 >= g.size()) return g.back();
  double frac = u - static_cast<double>(k);
  return g[k] * (1.0 - frac) + g[k + 1] * frac;
}

double GCache::eval_se(double s) const {
  if (s < 0.0 || se.empty()) return 0.0;
  if (s >= s_max) return se.back();
  std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s / ds), se.size() - 1);
  return se[k];
}

GCache build_g_cache(chain::StepDist dist, std::size_t samples_per_point, RngStream rng,
                     double s_max, double ds, double gamma_ref, std::uint64_t step_cap) {
  GCache cache;
  cache.dist = dist;
  cache.s_max = s_max;
  cache.ds = ds;
  cache.gamma_ref = gamma_ref;
  std::size_t npts = static_cast<std::size_t>(std::round(s_max / ds)) + 1;
  cache.g.resize(npts);
  cache.se.resize(npts);
  for (std::size_t k = 0; k < npts; ++k) {
    double s = ds * static_cast<double>(k);
    HittingQuery q{s, gamma_ref, dist};
    HitProb hp = hit_prob_mc(q, samples_per_point, rng.child(k), step_cap);
    cache.g[k] = (gamma_ref + s) * hp.p;
    cache.se[k] = (gamma_ref + s) * hp.stderr_;
  }
  // fitted tail offset: mean of (G_hat - s) over the top quarter of the grid
  double acc = 0.0;
  std::size_t lo = npts - npts / 4, cnt = 0;
  for (std::size_t k = lo; k < npts; ++k) {
    acc += cache.g[k] - ds * static_cast<double>(k);
    ++cnt;
  }
  cache.tail_bias = cnt > 0 ? acc / static_cast<double>(cnt) : 0.0;
  return cache;
}

RenewalCheck check_renewal(double s, chain::StepDist dist, const GCache& cache,
                           std::size_t samples, RngStream rng) {
  if (!(s >= 0.0)) throw std::invalid_argument("check_renewal: s must be >= 0");
  double lhs = cache.eval(s);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double z = chain::sample_step(dist, rng);
    double val = z > -s ? cache.eval(s + z) : 0.0;
    sum += val;
    sumsq += val * val;
  }
  double n = static_cast<double>(samples);
  double rhs = sum / n;
  double var = (sumsq - n * rhs * rhs) / (n - 1.0);
  if (var < 0.0) var = 0.0;
  RenewalCheck out;
  out.g_lhs = lhs;
  out.g_rhs = rhs;
  out.rhs_se = std::sqrt(var / n);
  out.residual = std::abs(lhs - rhs);
  return out;
}

HalfIdentity check_half_identity(chain::StepDist dist, const GCache& cache) {
  // trapezoid over the cache grid; nu([s,inf)) in closed form
  double ds = cache.ds;
  std::size_t n = cache.g.size();
  double integral = 0.0, var = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double s0 = ds * static_cast<double>(k);
    double s1 = s0 + ds;
    double f0 = chain::step_tail_geq(dist, s0) * cache.g[k];
    double f1 = chain::step_tail_geq(dist, s1) * cache.g[k + 1];
    integral += 0.5 * ds * (f0 + f1);
  }
  // independent MC errors per grid point, each appearing in two cells
  for (std::size_t k = 0; k < n; ++k) {
    double s0 = ds * static_cast<double>(k);
    double w = (k == 0 || k + 1 == n) ? 0.5 * ds : ds;
    double e = chain::step_tail_geq(dist, s0) * cache.se[k] * w;
    var += e * e;
  }
  // analytic tail with G(s) ~ s + bias
  double s_end = ds * static_cast<double>(n - 1);
  double tail = 0.0;
  double step = ds / 4.0;
  for (double s = s_end; s < s_end + 40.0; s += step) {
    double mid = s + 0.5 * step;
    double t = chain::step_tail_geq(dist, mid);
    if (t <= 0.0) break;
    tail += t * (mid + cache.tail_bias) * step;
  }
  return HalfIdentity{integral + tail, std::sqrt(var)};
}

double half_identity_rademacher_closed_form() {
  // integrand nu([s,inf)) * ceil(s) is piecewise constant with breaks at the
  // integers; midpoint cells aligned with the breaks integrate it exactly
  const double h = 1e-4;
  double acc = 0.0;
  for (double s = 0.0; s < 2.0; s += h) {
    double mid = s + 0.5 * h;
    acc += chain::step_tail_geq(chain::StepDist::rademacher, mid) * std::ceil(mid) * h;
  }
  return acc;
}

fan::Excursion conditioned_excursion_sample(double z, double gamma, double eps,
                                            chain::StepDist dist, RngStream rng,
                                            double horizon, std::uint64_t retry_cap) {
  if (!(z >= 0.0)) throw std::invalid_argument("conditioned_excursion_sample: z >= 0");
  if (!(gamma > 0.0 && eps > 0.0))
    throw std::invalid_argument("conditioned_excursion_sample: need gamma, eps > 0");
  if (retry_cap == 0)
    retry_cap = static_cast<std::uint64_t>(1000.0 / std::sqrt(eps));
  const double x0 = z * std::sqrt(eps);
  const double se = std::sqrt(eps);
  const std::size_t max_samples =
      static_cast<std::size_t>(std::floor(horizon / eps)) + 1;

  for (std::uint64_t attempt = 0; attempt < retry_cap; ++attempt) {
    RngStream s = rng.child(attempt);
    chain::StepBuffer buf(dist, s);
    fan::Excursion w;
    w.h = eps;
    w.birth_level = x0;
    w.kill_level = 0.0;
    w.values.push_back(x0);
    double pos = x0;
    bool reached = false, dead = false;
    while (w.values.size() < max_samples) {
      pos += se * buf.next();
      w.values.push_back(pos);
      if (!reached && pos >= gamma) reached = true;
      if (pos < 0.0) {
        dead = true;
        break;
      }
      if (reached && pos <= 0.0) {
        dead = true;
        break;
      }
    }
    if (!reached) continue;  // died or ran out of horizon before gamma
    w.clipped = !dead;
    w.e = dead ? eps * static_cast<double>(w.values.size() - 1) : horizon;
    return w;
  }
  throw RetryCapExhausted(retry_cap);
}

}  // namespace tdmcfan::hitting
