#pragma once

// Ticketed branching walkers: killing against the ticket, offspring counts
// max{floor(P+u),1}, offspring tickets U(1/P, 1), and the unbiased estimator
// over replica ensembles.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tdmcfan/chain.hpp"
#include "tdmcfan/rng.hpp"

namespace tdmcfan::tdmc {

class PopulationExplosion : public std::runtime_error {
 public:
  explicit PopulationExplosion(std::uint64_t n)
      : std::runtime_error("tdmc: population exceeded cap (" + std::to_string(n) + ")") {}
};

struct Particle {
  double x = 0.0;
  double theta = 1.0;  // (0,1]; 0.0 is the immortal sentinel
  std::uint32_t generation = 0;
  double birth_time = 0.0;
  std::uint64_t lineage = 0;
  RngStream rng;

  bool immortal() const { return theta == 0.0; }
  // Time-invariant tag: e^{-v} = theta * e^{-V(x)}.
  double tag(const chain::Potential& potential) const;
};

struct EnsembleStats {
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
  std::uint64_t work = 0;  // sum of N over steps
};

struct Ensemble {
  std::vector<Particle> particles;
  double time = 0.0;
  std::uint64_t next_lineage = 0;
  EnsembleStats stats;
  RngStream replica_rng;  // parent of all particle streams in this replica

  std::size_t size() const { return particles.size(); }
};

// M copies at x0; each draws theta0 ~ U(0,1) from its own stream unless
// immortal (theta = 0 sentinel, used by the rate and moment experiments).
Ensemble make_ensemble(std::size_t M, double x0, RngStream replica_rng,
                       bool immortal = false);

struct BranchDecision {
  bool survives = false;
  std::uint64_t n_offspring = 0;  // total count including the survivor
};

// P < theta kills; otherwise max{floor(P+u), 1} copies.
BranchDecision branch_decision(double P, double theta, double u);

// ticket[0] = theta/P for the continuing particle, then n_off-1 independent
// U(1/P, 1) draws.  Requires P > 1 whenever n_off >= 2 (that case is
// unreachable from branch_decision otherwise).
std::vector<double> spawn_tickets(double P, double theta, std::uint64_t n_off,
                                  RngStream& rng);

inline constexpr std::uint64_t kDefaultParticleCap = 10'000'000;

// One branching step: Euler-advance every walker, apply the ticket rule,
// insert offspring after their parent (ascending parent order), advance time
// by eps.  Throws PopulationExplosion above the cap.
void tdmc_step(Ensemble& ens, const chain::Potential& potential,
               const chain::ChainParams& params, chain::StepDist dist,
               std::uint64_t particle_cap = kDefaultParticleCap);

using StepHook = std::function<void(const Ensemble&)>;

// Advance to time t (multiple of eps), calling the hook after every step.
void run_to_time(Ensemble& ens, double t, const chain::Potential& potential,
                 const chain::ChainParams& params, chain::StepDist dist,
                 std::uint64_t particle_cap = kDefaultParticleCap,
                 const StepHook& hook = nullptr);

struct EstimatorResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::vector<double> replica_estimates;
};

// hat f_t = (1/M) sum_j f(x_t^j) per replica, averaged across replicas.
EstimatorResult run_estimator(const std::function<double(double)>& f, double t,
                              std::size_t M, std::size_t replicas,
                              const chain::Potential& potential,
                              const chain::ChainParams& params, chain::StepDist dist,
                              RngStream rng,
                              std::uint64_t particle_cap = kDefaultParticleCap);

// Per-replica terminal inspection for moment / law experiments.
void run_replicas(std::size_t M, std::size_t replicas, double t,
                  const chain::Potential& potential, const chain::ChainParams& params,
                  chain::StepDist dist, RngStream rng, bool immortal,
                  const std::function<void(std::size_t, const Ensemble&)>& collect,
                  std::uint64_t particle_cap = kDefaultParticleCap,
                  const StepHook& hook = nullptr);

struct RateEstimate {
  double rate = 0.0;
  double stderr_ = 0.0;
};

// Immortal-ancestor experiment: rate per unit time of first-generation
// offspring whose excursion above its own killing barrier reaches gamma.
RateEstimate offspring_rate_experiment(double a, double gamma, double T, double eps,
                                       chain::StepDist dist, std::size_t replicas,
                                       RngStream rng);

}  // namespace tdmcfan::tdmc
