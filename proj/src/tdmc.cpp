#include "tdmcfan/tdmc.hpp"

#include <cmath>

#include "tdmcfan/det_math.hpp"
#include "tdmcfan/simd.hpp"

namespace tdmcfan::tdmc {

namespace {

void check_ticket(double theta) {
  if (!(theta == 0.0 || (theta > 0.0 && theta <= 1.0)))
    throw std::logic_error("tdmc: ticket left (0,1]: " + std::to_string(theta));
}

}  // namespace

double Particle::tag(const chain::Potential& potential) const {
  if (immortal()) return std::numeric_limits<double>::infinity();
  return potential(x) - std::log(theta);
}

Ensemble make_ensemble(std::size_t M, double x0, RngStream replica_rng, bool immortal) {
  Ensemble ens;
  ens.replica_rng = replica_rng;
  ens.particles.reserve(M);
  for (std::size_t j = 0; j < M; ++j) {
    Particle p;
    p.x = x0;
    p.lineage = ens.next_lineage++;
    p.rng = replica_rng.child(p.lineage);
    p.theta = immortal ? 0.0 : p.rng.uniform_oo();
    ens.particles.push_back(p);
  }
  return ens;
}

BranchDecision branch_decision(double P, double theta, double u) {
  if (!(P > 0.0)) throw std::invalid_argument("branch_decision: P must be > 0");
  if (!(theta == 0.0 || (theta > 0.0 && theta <= 1.0)))
    throw std::invalid_argument("branch_decision: theta outside (0,1]");
  if (!(u >= 0.0 && u < 1.0))
    throw std::invalid_argument("branch_decision: u outside [0,1)");
  if (P < theta) return {false, 0};
  double floored = std::floor(P + u);
  std::uint64_t n = floored < 1.0 ? 1 : static_cast<std::uint64_t>(floored);
  return {true, n};
}

std::vector<double> spawn_tickets(double P, double theta, std::uint64_t n_off,
                                  RngStream& rng) {
  if (n_off == 0) throw std::invalid_argument("spawn_tickets: n_off must be >= 1");
  if (!(P >= theta)) throw std::invalid_argument("spawn_tickets: requires P >= theta");
  std::vector<double> tickets(n_off);
  tickets[0] = theta == 0.0 ? 0.0 : theta / P;
  if (n_off > 1) {
    // floor(P+u) >= 2 forces P > 1, so U(1/P, 1) is a genuine interval
    if (!(P > 1.0))
      throw std::logic_error("spawn_tickets: n_off >= 2 with P <= 1 is unreachable");
    double lo = 1.0 / P;
    for (std::uint64_t i = 1; i < n_off; ++i) tickets[i] = rng.uniform_open(lo, 1.0);
  }
  return tickets;
}

void tdmc_step(Ensemble& ens, const chain::Potential& potential,
               const chain::ChainParams& params, chain::StepDist dist,
               std::uint64_t particle_cap) {
  params.validate();
  const std::size_t n = ens.particles.size();
  ens.stats.work += n;
  if (n == 0) {
    ens.time += params.eps;
    return;
  }

  // Bulk phase: one xi and one u per particle from its own stream.
  std::vector<std::uint64_t> keys(n), blocks(n);
  std::vector<double> xold(n), xnew(n), xi(n), P(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = ens.particles[i];
    keys[i] = p.rng.key();
    blocks[i] = p.rng.block();
    p.rng.skip_blocks(1);
    xold[i] = p.x;
  }
  const auto& kt = simd::kernels();
  kt.gather_steps(chain::to_step_kind(dist), keys.data(), blocks.data(), xi.data(), n);

  const double se = std::sqrt(params.eps);
  if (params.default_dynamics()) {
    kt.axpy(se, xi.data(), xold.data(), xnew.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double drift = params.drift ? params.drift(xold[i]) : 0.0;
      double sigma = params.diffusion ? params.diffusion(xold[i]) : 1.0;
      xnew[i] = xold[i] + params.eps * drift + se * sigma * xi[i];
    }
  }

  if (potential.is_linear()) {
    // P = e^{-chi} = e^{a (xnew - xold)}
    kt.exp_step_weights(potential.slope(), xold.data(), xnew.data(), P.data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      P[i] = detmath::det_exp(-potential.chi(xold[i], xnew[i]));
  }

  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = ens.particles[i];
    keys[i] = p.rng.key();
    blocks[i] = p.rng.block();
    p.rng.skip_blocks(1);
  }
  kt.gather_uniform01(keys.data(), blocks.data(), u.data(), n);

  // Sequential phase: kill / copy, ascending particle index.
  std::vector<Particle> next;
  next.reserve(n + n / 4);
  const double t_birth = ens.time + params.eps;
  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = ens.particles[i];
    BranchDecision d = branch_decision(P[i], p.theta, u[i]);
    if (!d.survives) {
      ens.stats.deaths += 1;
      continue;
    }
    std::vector<double> tickets = spawn_tickets(P[i], p.theta, d.n_offspring, p.rng);
    p.x = xnew[i];
    p.theta = tickets[0];
    check_ticket(p.theta);
    next.push_back(p);
    for (std::uint64_t j = 1; j < d.n_offspring; ++j) {
      Particle off;
      off.x = xnew[i];
      off.theta = tickets[j];
      check_ticket(off.theta);
      off.generation = p.generation + 1;
      off.birth_time = t_birth;
      off.lineage = ens.next_lineage++;
      off.rng = ens.replica_rng.child(off.lineage);
      next.push_back(off);
      ens.stats.births += 1;
    }
  }
  ens.particles = std::move(next);
  ens.time += params.eps;
  if (ens.particles.size() > particle_cap)
    throw PopulationExplosion(ens.particles.size());
}

void run_to_time(Ensemble& ens, double t, const chain::Potential& potential,
                 const chain::ChainParams& params, chain::StepDist dist,
                 std::uint64_t particle_cap, const StepHook& hook) {
  std::size_t n_steps = params.steps_for(t - ens.time);
  for (std::size_t k = 0; k < n_steps; ++k) {
    tdmc_step(ens, potential, params, dist, particle_cap);
    if (hook) hook(ens);
  }
}

EstimatorResult run_estimator(const std::function<double(double)>& f, double t,
                              std::size_t M, std::size_t replicas,
                              const chain::Potential& potential,
                              const chain::ChainParams& params, chain::StepDist dist,
                              RngStream rng, std::uint64_t particle_cap) {
  if (M == 0 || replicas == 0)
    throw std::invalid_argument("run_estimator: M and replicas must be >= 1");
  EstimatorResult res;
  res.replica_estimates.resize(replicas);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    Ensemble ens = make_ensemble(M, 0.0, rng.child(r));
    run_to_time(ens, t, potential, params, dist, particle_cap);
    double acc = 0.0;
    for (const Particle& p : ens.particles) acc += f(p.x);
    double est = acc / static_cast<double>(M);
    res.replica_estimates[r] = est;
    sum += est;
    sumsq += est * est;
  }
  double mean = sum / static_cast<double>(replicas);
  res.estimate = mean;
  if (replicas > 1) {
    double var = (sumsq - static_cast<double>(replicas) * mean * mean) /
                 (static_cast<double>(replicas) - 1.0);
    if (var < 0.0) var = 0.0;
    res.stderr_ = std::sqrt(var / static_cast<double>(replicas));
  }
  return res;
}

void run_replicas(std::size_t M, std::size_t replicas, double t,
                  const chain::Potential& potential, const chain::ChainParams& params,
                  chain::StepDist dist, RngStream rng, bool immortal,
                  const std::function<void(std::size_t, const Ensemble&)>& collect,
                  std::uint64_t particle_cap, const StepHook& hook) {
  for (std::size_t r = 0; r < replicas; ++r) {
    Ensemble ens = make_ensemble(M, 0.0, rng.child(r), immortal);
    run_to_time(ens, t, potential, params, dist, particle_cap, hook);
    collect(r, ens);
  }
}

RateEstimate offspring_rate_experiment(double a, double gamma, double T, double eps,
                                       chain::StepDist dist, std::size_t replicas,
                                       RngStream rng) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw std::invalid_argument("offspring_rate_experiment: gamma outside (0,1]");
  if (!(eps <= gamma * gamma / 10.0))
    throw std::invalid_argument("offspring_rate_experiment: need eps <= gamma^2/10");
  chain::ChainParams params;
  params.eps = eps;
  std::size_t n_steps = params.steps_for(T);
  const double se = std::sqrt(eps);

  double sum = 0.0, sumsq = 0.0;
  for (std::size_t r = 0; r < replicas; ++r) {
    RngStream root = rng.child(r);
    RngStream anc = root.child(0);
    std::uint64_t lineage = 1;
    double x = 0.0;
    std::uint64_t count = 0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      double xi = chain::sample_step(dist, anc);
      double xn = x + se * xi;
      double P = detmath::det_exp(a * (xn - x));  // V(x) = -a x
      double u = anc.uniform01();
      BranchDecision d = branch_decision(P, 0.0, u);
      // tickets U(1/P, 1) give barriers uniform-ish within the upward step
      for (std::uint64_t j = 1; j < d.n_offspring; ++j) {
        double ticket = anc.uniform_open(1.0 / P, 1.0);
        double barrier = a == 0.0 ? -std::numeric_limits<double>::infinity()
                                  : xn + std::log(ticket) / a;
        RngStream off = root.child(lineage++);
        chain::StepBuffer buf(dist, off);
        double pos = xn;
        while (true) {
          pos += se * buf.next();
          if (pos - barrier >= gamma) {
            ++count;
            break;
          }
          if (pos < barrier) break;
        }
      }
      x = xn;
    }
    double rate = static_cast<double>(count) / T;
    sum += rate;
    sumsq += rate * rate;
  }
  double mean = sum / static_cast<double>(replicas);
  RateEstimate res;
  res.rate = mean;
  if (replicas > 1) {
    double var = (sumsq - static_cast<double>(replicas) * mean * mean) /
                 (static_cast<double>(replicas) - 1.0);
    if (var < 0.0) var = 0.0;
    res.stderr_ = std::sqrt(var / static_cast<double>(replicas));
  }
  return res;
}

}  // namespace tdmcfan::tdmc
