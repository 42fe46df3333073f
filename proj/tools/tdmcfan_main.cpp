// tdmcfan command line: run experiments from JSON configs, sample fan
// realizations, estimate first-passage functions, compute configuration
// distances, and run the full verification suite.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdmcfan/acceptance.hpp"
#include "tdmcfan/chain.hpp"
#include "tdmcfan/fan.hpp"
#include "tdmcfan/harness.hpp"
#include "tdmcfan/hitting.hpp"
#include "tdmcfan/lp_space.hpp"
#include "tdmcfan/simd.hpp"
#include "tdmcfan/stats.hpp"

namespace {

using namespace tdmcfan;

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
            const std::string& out, int jobs) {
  harness::ExperimentConfig cfg =
      harness::ExperimentConfig::from_json_string(slurp(config_path));
  if (has_seed) cfg.seed = seed_override;
  if (!out.empty()) cfg.out = out;
  if (jobs > 0) cfg.jobs = jobs;
  harness::RunManifest manifest = harness::run_experiment(cfg);
  std::cout << manifest.to_json_string() << "\n";
  return manifest.all_pass ? 0 : 1;
}

int cmd_fan(double a, double gamma, int n_max, double T, double h, std::uint64_t seed,
            const std::string& out) {
  fan::FanParams fp;
  fp.a = a;
  fp.gamma = gamma;
  fp.n_max = n_max;
  fp.T = T;
  fp.h = h > 0 ? h : gamma * gamma / 100.0;
  fan::FanRealization fr = fan::sample_fan(0.0, std::nullopt, fp, RngStream(seed));

  std::filesystem::create_directories(out);
  {
    std::ofstream os(std::filesystem::path(out) / "fan.json");
    os << fan::to_json(fr) << "\n";
  }
  {
    std::ofstream os(std::filesystem::path(out) / "fan_counts.csv");
    os << "t,N_t,W_t\n";
    std::vector<double> grid;
    for (int i = 0; i <= 512; ++i) grid.push_back(T * i / 512.0);
    fan::WorkloadResult w = fan::workload(fr, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
      os << harness::fmt_g17(grid[i]) << "," << harness::fmt_g17(w.counts[i]) << ","
         << harness::fmt_g17(w.workload[i]) << "\n";
  }
  std::cout << "excursions=" << fr.excursions.size()
            << " N(T/2)=" << fan::particle_count(fr, T / 2.0) << " -> " << out << "\n";
  return 0;
}

int cmd_hitting(const std::string& dist_name, double s_max, double ds,
                std::uint64_t samples, std::uint64_t seed, const std::string& out) {
  auto d = chain::step_dist_from_name(dist_name);
  if (!d) {
    std::cerr << "unknown distribution '" << dist_name << "'\n";
    return 2;
  }
  hitting::GCache cache = hitting::build_g_cache(*d, samples, RngStream(seed), s_max, ds);
  std::filesystem::create_directories(out);
  std::ofstream os(std::filesystem::path(out) / "g_cache.csv");
  os << "s,G,stderr\n";
  for (std::size_t k = 0; k < cache.g.size(); ++k)
    os << harness::fmt_g17(ds * k) << "," << harness::fmt_g17(cache.g[k]) << ","
       << harness::fmt_g17(cache.se[k]) << "\n";
  hitting::HalfIdentity hi = hitting::check_half_identity(*d, cache);
  std::cout << "int nu([s,inf)) G(s) ds = " << hi.integral << " +- " << hi.stderr_
            << "\n";
  return 0;
}

int cmd_distance(const std::string& file_a, const std::string& file_b, double p,
                 double a) {
  std::ifstream fa(file_a), fb(file_b);
  if (!fa || !fb) {
    std::cerr << "cannot open input csv\n";
    return 2;
  }
  lp::PointMeasure mu = lp::read_csv(fa, a, p);
  lp::PointMeasure nu = lp::read_csv(fb, a, p);
  std::cout << harness::fmt_g17(lp::lp_distance(mu, nu, p, a)) << "\n";
  return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& out, int jobs) {
  auto results = acceptance::verify_all(seed, out, jobs, &std::cout);
  std::string verdict = acceptance::verdict_json(seed, results);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream os(std::filesystem::path(out) / "verdict.json");
    os << verdict << "\n";
  } else {
    std::cout << verdict << "\n";
  }
  return acceptance::all_pass(results) ? 0 : 1;
}

int cmd_calibrate_ks(std::size_t n, std::size_t trials, double level,
                     std::uint64_t seed) {
  RngStream root(seed);
  std::size_t rejected = 0;
  std::vector<double> x(n), y(n);
  for (std::size_t tr = 0; tr < trials; ++tr) {
    RngStream s = root.child(tr);
    for (auto& v : x) v = s.uniform01();
    for (auto& v : y) v = s.uniform01();
    if (stats::two_sample_ks(x, y).p_value < level) ++rejected;
  }
  double rate = static_cast<double>(rejected) / static_cast<double>(trials);
  std::cout << "null rejection rate at level " << level << ": " << rate << " ("
            << rejected << "/" << trials << ")\n";
  // power probe: a 0.2 shift must be detected decisively
  RngStream s = root.child(trials + 1);
  for (auto& v : x) v = s.uniform01();
  for (auto& v : y) v = s.uniform01() + 0.2;
  std::cout << "p-value under a 0.2 shift: " << stats::two_sample_ks(x, y).p_value
            << "\n";
  return rate <= 3.0 * level ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tdmcfan: ticketed branching walkers, Brownian-fan sampling and the verification harness"};
  app.require_subcommand(1);

  std::string config_path, out, dist_name = "standard-normal";
  std::string file_a, file_b;
  std::uint64_t seed = acceptance::kDefaultSeed;
  bool seed_given = false;
  int jobs = 0;
  double a = 1.0, gamma = 0.1, T = 1.0, h = 0.0, p = 0.5;
  double s_max = 8.0, ds = 0.1, level = 0.01;
  int n_max = 6;
  std::uint64_t samples = 10000, trials = 500, nks = 2000;

  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", seed, "64-bit RNG seed")->each([&](const std::string&) {
      seed_given = true;
    });
  };

  CLI::App* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "JSON config file")->required();
  add_seed(run);
  run->add_option("--out", out, "output directory");
  run->add_option("--jobs", jobs, "worker threads (TDMCFAN_JOBS overrides)");

  CLI::App* fan_cmd = app.add_subcommand("fan", "sample one fan realization to JSON/CSV");
  fan_cmd->add_option("--a", a, "intensity");
  fan_cmd->add_option("--gamma", gamma, "height truncation");
  fan_cmd->add_option("--n-max", n_max, "depth truncation");
  fan_cmd->add_option("--T", T, "horizon");
  fan_cmd->add_option("--grid-h", h, "grid step (default gamma^2/100)");
  add_seed(fan_cmd);
  fan_cmd->add_option("--out", out, "output directory")->required();

  CLI::App* hit = app.add_subcommand("hitting", "estimate G on a grid, write the CSV cache");
  hit->add_option("--dist", dist_name, "step distribution");
  hit->add_option("--s-max", s_max, "grid upper end");
  hit->add_option("--ds", ds, "grid step");
  hit->add_option("--samples", samples, "MC samples per grid point");
  add_seed(hit);
  hit->add_option("--out", out, "output directory")->required();

  CLI::App* dist_cmd = app.add_subcommand("distance", "lp distance between two point-measure CSV files");
  dist_cmd->add_option("file_a", file_a)->required();
  dist_cmd->add_option("file_b", file_b)->required();
  dist_cmd->add_option("--p", p, "exponent in (0,1]");
  dist_cmd->add_option("--a", a, "barrier slope");

  CLI::App* verify = app.add_subcommand("verify", "run the full acceptance suite");
  add_seed(verify);
  verify->add_option("--out", out, "output directory for CSVs and verdict.json");
  verify->add_option("--jobs", jobs, "worker threads (TDMCFAN_JOBS overrides)");

  CLI::App* cal = app.add_subcommand("calibrate-ks", "null calibration of the KS comparator");
  cal->add_option("--n", nks, "sample size per side");
  cal->add_option("--trials", trials, "number of null trials");
  cal->add_option("--level", level, "rejection level");
  add_seed(cal);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seed, seed_given, out, jobs);
    if (*fan_cmd) return cmd_fan(a, gamma, n_max, T, h, seed, out);
    if (*hit) return cmd_hitting(dist_name, s_max, ds, samples, seed, out);
    if (*dist_cmd) return cmd_distance(file_a, file_b, p, a);
    if (*verify) return cmd_verify(seed, out, jobs);
    if (*cal) return cmd_calibrate_ks(nks, trials, level, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
