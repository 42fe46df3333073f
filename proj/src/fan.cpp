#include "tdmcfan/fan.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "tdmcfan/simd.hpp"

namespace tdmcfan::fan {

namespace {

constexpr std::size_t kChunk = 4096;
constexpr std::size_t kPerExcursionGuard = std::size_t(1) << 24;

// Alive with a strictly-above-barrier value; evaluate and particle_count
// share this predicate so their counts agree exactly.
bool alive_strict(const Excursion& w, double t) {
  return w.alive_at(t) && w.value_at(t) > w.kill_level;
}

}  // namespace

double Excursion::value_at(double t) const {
  if (values.empty()) return birth_level;
  if (t <= s) return values.front();
  double u = (t - s) / h;
  std::size_t k = static_cast<std::size_t>(u);
  if (k + 1 >= values.size()) return values.back();
  double frac = u - static_cast<double>(k);
  return values[k] * (1.0 - frac) + values[k + 1] * frac;
}

double Excursion::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  return m;
}

std::uint64_t poisson_knuth(double mean, RngStream& rng) {
  if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
  std::uint64_t total = 0;
  while (mean > 0.0) {
    double lam = std::min(mean, 500.0);
    mean -= lam;
    double L = std::exp(-lam);
    double p = 1.0;
    std::uint64_t k = 0;
    do {
      ++k;
      p *= rng.uniform_oo();
    } while (p > L);
    total += k - 1;
  }
  return total;
}

Excursion sample_excursion_geq(double gamma, double h, RngStream rng, double t_cap) {
  if (!(gamma > 0.0)) throw std::invalid_argument("sample_excursion_geq: gamma must be > 0");
  if (!(h > 0.0 && h <= gamma * gamma / 100.0))
    throw std::invalid_argument("sample_excursion_geq: grid too coarse (need h <= gamma^2/100)");

  Excursion w;
  w.h = h;
  w.birth_level = 0.0;
  w.kill_level = 0.0;
  w.values.push_back(0.0);

  const auto& kt = simd::kernels();
  const double sh = std::sqrt(h);
  std::size_t max_samples = kPerExcursionGuard;
  if (std::isfinite(t_cap))
    max_samples = std::min<std::size_t>(
        max_samples, static_cast<std::size_t>(std::floor(t_cap / h)) + 1);

  // Bessel-3 ascent to the first grid passage of gamma.
  std::vector<double> nx(kChunk), ny(kChunk), nz(kChunk), r(kChunk);
  double cx = 0.0, cy = 0.0, cz = 0.0;
  bool reached = false;
  while (!reached && w.values.size() < max_samples) {
    std::size_t m = std::min(kChunk, max_samples - w.values.size());
    simd::fill_normal(rng, std::span(nx.data(), m));
    simd::fill_normal(rng, std::span(ny.data(), m));
    simd::fill_normal(rng, std::span(nz.data(), m));
    for (std::size_t i = 0; i < m; ++i) {
      cx += sh * nx[i];
      cy += sh * ny[i];
      cz += sh * nz[i];
      nx[i] = cx;
      ny[i] = cy;
      nz[i] = cz;
    }
    kt.norm3(nx.data(), ny.data(), nz.data(), r.data(), m);
    std::size_t hit = kt.first_ge(r.data(), m, gamma);
    std::size_t take = std::min(hit + 1, m);
    w.values.insert(w.values.end(), r.begin(), r.begin() + take);
    if (hit < m) {
      // the continuous decomposition starts the downward Brownian leg at
      // exactly gamma; keeping the O(sqrt h) overshoot would inflate every
      // descendant's lifetime by a gamma-proportional factor that the
      // gamma-extrapolation cannot remove
      w.values.back() = gamma;
      reached = true;
    }
  }
  if (!reached) {
    w.clipped = true;
    w.e = std::isfinite(t_cap) ? w.s + t_cap
                               : w.s + h * static_cast<double>(w.values.size() - 1);
    if (w.values.size() >= kPerExcursionGuard) throw MemoryGuard(w.values.size());
    return w;
  }

  // Brownian descent from the passage value down to 0.
  double pos = w.values.back();
  bool dead = false;
  while (!dead && w.values.size() < max_samples) {
    std::size_t m = std::min(kChunk, max_samples - w.values.size());
    simd::fill_normal(rng, std::span(nx.data(), m));
    for (std::size_t i = 0; i < m; ++i) {
      pos += sh * nx[i];
      nx[i] = pos;
    }
    std::size_t hit = kt.first_le(nx.data(), m, 0.0);
    std::size_t take = std::min(hit + 1, m);
    w.values.insert(w.values.end(), nx.begin(), nx.begin() + take);
    if (hit < m) {
      dead = true;
    } else {
      pos = w.values.back();
    }
  }
  if (!dead) {
    w.clipped = true;
    if (w.values.size() >= kPerExcursionGuard) throw MemoryGuard(w.values.size());
    // a clipped excursion is alive through the whole cap, not just to the
    // last grid point below it
    w.e = std::isfinite(t_cap) ? w.s + t_cap
                               : w.s + h * static_cast<double>(w.values.size() - 1);
  } else {
    w.e = w.s + h * static_cast<double>(w.values.size() - 1);
  }
  return w;
}

namespace {

struct BuiltExcursion {
  Excursion exc;
  RngStream base;  // stream whose child(1) drives this excursion's kernel
};

std::vector<BuiltExcursion> kernel_offspring(const Excursion& w, double a,
                                             double gamma, double T, double h,
                                             RngStream kernel_rng) {
  std::vector<BuiltExcursion> out;
  double lo = std::max(w.s, 0.0);
  double hi = std::min(w.e, T);
  double len = hi - lo;
  if (!(len > 0.0) || a == 0.0) return out;
  double mean = a / (2.0 * gamma) * len;
  std::uint64_t k = poisson_knuth(mean, kernel_rng);
  std::vector<double> taus(k);
  for (std::uint64_t j = 0; j < k; ++j) taus[j] = lo + kernel_rng.uniform01() * len;
  for (std::uint64_t j = 0; j < k; ++j) {
    double tau = taus[j];
    RngStream base = kernel_rng.child(j);
    Excursion exc = sample_excursion_geq(gamma, h, base.child(0), T - tau);
    double shift = w.value_at(tau);
    exc.s += tau;
    exc.e += tau;
    exc.birth_level += shift;
    exc.kill_level += shift;
    for (double& v : exc.values) v += shift;
    exc.generation = w.generation + 1;
    out.push_back(BuiltExcursion{std::move(exc), base});
  }
  return out;
}

}  // namespace

std::vector<Excursion> sample_kernel(const Excursion& w, double a, double gamma,
                                     double T, double h, RngStream rng) {
  std::vector<Excursion> out;
  for (auto& b : kernel_offspring(w, a, gamma, T, h, rng))
    out.push_back(std::move(b.exc));
  return out;
}

FanRealization sample_fan(double x, std::optional<double> v, const FanParams& params,
                          RngStream rng) {
  if (!(params.a > 0.0)) throw std::invalid_argument("sample_fan: a must be > 0");
  if (!(params.T > 0.0)) throw std::invalid_argument("sample_fan: T must be > 0");
  if (params.n_max < 0) throw std::invalid_argument("sample_fan: n_max must be >= 0");
  if (!(params.h > 0.0 && params.h <= params.gamma * params.gamma / 100.0))
    throw std::invalid_argument("sample_fan: grid too coarse (need h <= gamma^2/100)");

  FanRealization fr;
  fr.params = params;
  fr.x0 = x;

  double tag;
  if (v.has_value()) {
    tag = *v;
    if (!(tag > -params.a * x))
      throw std::invalid_argument("sample_fan: need v > -a x");
  } else {
    RngStream setup = rng.child(0);
    if (params.depth_mean_a) {
      double L = params.a * setup.exponential();  // Exp with mean a
      tag = params.a * L - params.a * x;
    } else {
      tag = setup.exponential() - params.a * x;  // v - (-a x) ~ Exp(1)
    }
  }
  fr.v0 = tag;
  double kill = -tag / params.a;

  // Ancestor: Brownian path from x to the barrier, clipped at T.
  RngStream anc_base = rng.child(1);
  {
    Excursion w;
    w.h = params.h;
    w.birth_level = x;
    w.kill_level = kill;
    w.values.push_back(x);
    RngStream path = anc_base.child(0);
    const auto& kt = simd::kernels();
    const double sh = std::sqrt(params.h);
    std::size_t max_samples =
        static_cast<std::size_t>(std::floor(params.T / params.h)) + 1;
    std::vector<double> buf(kChunk);
    double pos = x;
    bool dead = false;
    while (!dead && w.values.size() < max_samples) {
      std::size_t m = std::min(kChunk, max_samples - w.values.size());
      simd::fill_normal(path, std::span(buf.data(), m));
      for (std::size_t i = 0; i < m; ++i) {
        pos += sh * buf[i];
        buf[i] = pos;
      }
      std::size_t hit = kt.first_le(buf.data(), m, kill);
      std::size_t take = std::min(hit + 1, m);
      w.values.insert(w.values.end(), buf.begin(), buf.begin() + take);
      if (hit < m) {
        dead = true;
      } else {
        pos = w.values.back();
      }
    }
    w.clipped = !dead;
    w.e = dead ? params.h * static_cast<double>(w.values.size() - 1) : params.T;
    fr.total_samples += w.values.size();
    fr.excursions.push_back(std::move(w));
  }

  std::vector<BuiltExcursion> frontier;
  frontier.push_back(BuiltExcursion{fr.excursions[0], anc_base});
  for (int g = 1; g <= params.n_max; ++g) {
    std::vector<BuiltExcursion> next;
    for (const auto& parent : frontier) {
      auto offs = kernel_offspring(parent.exc, params.a, params.gamma, params.T,
                                   params.h, parent.base.child(1));
      for (auto& o : offs) {
        fr.total_samples += o.exc.values.size();
        if (fr.total_samples > params.sample_guard) throw MemoryGuard(fr.total_samples);
        fr.excursions.push_back(o.exc);
        next.push_back(std::move(o));
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return fr;
}

lp::PointMeasure evaluate(const FanRealization& fr, double t, double p) {
  if (!(t >= 0.0 && t <= fr.params.T))
    throw std::invalid_argument("evaluate: t outside [0, T]");
  lp::PointMeasure mu;
  mu.a = fr.params.a;
  mu.p = p;
  for (const auto& w : fr.excursions) {
    if (!alive_strict(w, t)) continue;
    mu.points.push_back(lp::TaggedPoint::at(w.value_at(t),
                                            -fr.params.a * w.kill_level, w.generation));
  }
  return mu;
}

std::size_t particle_count(const FanRealization& fr, double t) {
  std::size_t n = 0;
  for (const auto& w : fr.excursions)
    if (alive_strict(w, t)) ++n;
  return n;
}

WorkloadResult workload(const FanRealization& fr, std::span<const double> time_grid) {
  if (time_grid.size() < 2) throw std::invalid_argument("workload: grid too small");
  WorkloadResult out;
  out.grid.assign(time_grid.begin(), time_grid.end());
  out.counts.resize(time_grid.size());
  out.workload.resize(time_grid.size());
  for (std::size_t i = 0; i < time_grid.size(); ++i) {
    if (time_grid[i] < 0.0 || time_grid[i] > fr.params.T)
      throw std::invalid_argument("workload: grid point outside [0, T]");
    out.counts[i] = static_cast<double>(particle_count(fr, time_grid[i]));
  }
  out.workload[0] = 0.0;
  for (std::size_t i = 1; i < time_grid.size(); ++i) {
    double dt = time_grid[i] - time_grid[i - 1];
    out.workload[i] =
        out.workload[i - 1] + 0.5 * dt * (out.counts[i] + out.counts[i - 1]);
  }
  // max over dyadic lags of |W(t+d) - W(t)| / (d |log d|); lags are kept
  // small enough that |log d| stays away from its zero at d = 1
  double base = out.grid[1] - out.grid[0];
  double range = out.grid.back() - out.grid.front();
  double modulus = 0.0;
  for (std::size_t lag = 1; lag < out.grid.size(); lag *= 2) {
    double d = base * static_cast<double>(lag);
    if (d > 0.5 * range || d > 0.5) break;
    double denom = d * std::abs(std::log(d));
    if (denom <= 0.0) continue;
    for (std::size_t i = 0; i + lag < out.grid.size(); ++i) {
      double diff = std::abs(out.workload[i + lag] - out.workload[i]);
      modulus = std::max(modulus, diff / denom);
    }
  }
  out.modulus = modulus;
  return out;
}

double truncation_contraction_check(double a, double eta, std::size_t samples,
                                    RngStream rng) {
  if (!(eta > 0.0)) throw std::invalid_argument("truncation_contraction_check: eta > 0");
  if (a == 0.0) return 0.0;
  // Lifetime part of int F dQ: int (1 - e^{-eta s}) s^{-3/2} ds / sqrt(2 pi),
  // by Simpson quadrature after s = u^2.
  auto g = [eta](double u) {
    if (u == 0.0) return 2.0 * eta;
    double s = u * u;
    return 2.0 * (1.0 - std::exp(-eta * s)) / s;
  };
  const std::size_t nq = 100000;
  double U = 2000.0 / std::sqrt(eta);
  double hq = U / static_cast<double>(nq);
  double acc = g(0.0) + g(U);
  for (std::size_t i = 1; i < nq; ++i)
    acc += g(hq * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  double lifetime_integral = acc * hq / 3.0 + 2.0 / U;  // analytic tail ~ 2/U
  lifetime_integral /= std::sqrt(detmath::kTwoPi);

  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    RngStream s = rng.child(i);
    // synthetic parent: start time in [0,1], lifetime with a heavy-ish mix
    double start = s.uniform01();
    double len = 0.05 + s.exponential() * 0.5;
    double F = std::exp(-eta * start) * (1.0 - std::exp(-eta * len));
    // time part by Monte Carlo over tau ~ U(start, start+len)
    double acc_tau = 0.0;
    const int m = 256;
    for (int j = 0; j < m; ++j)
      acc_tau += std::exp(-eta * (start + s.uniform01() * len));
    double time_integral = acc_tau / m * len;
    double ratio = 0.5 * a * lifetime_integral * time_integral / F;
    worst = std::max(worst, ratio);
  }
  return worst;
}

std::string to_json(const FanRealization& fr) {
  nlohmann::json j;
  j["params"] = {{"a", fr.params.a},          {"gamma", fr.params.gamma},
                 {"n_max", fr.params.n_max},  {"T", fr.params.T},
                 {"h", fr.params.h},          {"depth_mean_a", fr.params.depth_mean_a}};
  j["x0"] = fr.x0;
  j["v0"] = fr.v0;
  j["excursions"] = nlohmann::json::array();
  for (const auto& w : fr.excursions) {
    j["excursions"].push_back({{"s", w.s},
                               {"e", w.e},
                               {"h", w.h},
                               {"generation", w.generation},
                               {"values", w.values},
                               {"birth_level", w.birth_level},
                               {"kill_level", w.kill_level},
                               {"clipped", w.clipped}});
  }
  return j.dump();
}

FanRealization fan_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  FanRealization fr;
  fr.params.a = j.at("params").at("a");
  fr.params.gamma = j.at("params").at("gamma");
  fr.params.n_max = j.at("params").at("n_max");
  fr.params.T = j.at("params").at("T");
  fr.params.h = j.at("params").at("h");
  fr.params.depth_mean_a = j.at("params").value("depth_mean_a", false);
  fr.x0 = j.value("x0", 0.0);
  fr.v0 = j.value("v0", 0.0);
  for (const auto& e : j.at("excursions")) {
    Excursion w;
    w.s = e.at("s");
    w.e = e.at("e");
    w.h = e.at("h");
    w.generation = e.at("generation");
    w.values = e.at("values").get<std::vector<double>>();
    w.birth_level = e.value("birth_level", w.values.empty() ? 0.0 : w.values.front());
    w.kill_level = e.value("kill_level", w.birth_level);
    w.clipped = e.value("clipped", false);
    fr.total_samples += w.values.size();
    fr.excursions.push_back(std::move(w));
  }
  return fr;
}

}  // namespace tdmcfan::fan
