#pragma once

// Experiment harness: configuration, dispatch, result manifests, CSV
// persistence and replica-level parallelism.  Aggregation is slot-indexed and
// reduced in replica order, so outputs are byte-identical for any job count.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tdmcfan/chain.hpp"
#include "tdmcfan/rng.hpp"

namespace tdmcfan::harness {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& why)
      : std::invalid_argument("config field '" + field + "': " + why), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class ExperimentKind {
  unbiasedness,
  mean_count,
  fan_mean,
  g_identity,
  rate_constant,
  moments,
  kolmogorov,
  law_compare,
  excursion_compare,
  distance,
};

std::string kind_name(ExperimentKind k);
std::optional<ExperimentKind> kind_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::unbiasedness;
  double a = 1.0;
  double eps = 0.01;
  double t = 0.5;
  double gamma = 0.5;
  double h = 1e-4;
  double T = 1.0;
  double p = 0.5;
  double q = 2.0;
  int n_max = 6;
  std::uint64_t M = 100;
  std::uint64_t replicas = 1000;
  std::uint64_t samples = 100000;
  chain::StepDist dist = chain::StepDist::standard_normal;
  std::uint64_t seed = 71830923;
  std::string out;   // output directory; empty = no files
  int jobs = 1;      // TDMCFAN_JOBS env overrides
  double z_threshold = 3.0;
  double ks_level = 0.01;

  void validate() const;
  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
};

struct MetricResult {
  std::string name;
  double value = 0.0;
  double stderr_ = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

struct RunManifest {
  ExperimentConfig config;
  std::string version;
  double wall_seconds = 0.0;
  std::vector<MetricResult> metrics;
  bool all_pass = false;

  std::string to_json_string() const;
};

// Rows of an output CSV (header + preformatted lines).
struct CsvTable {
  std::string name;
  std::string header;
  std::vector<std::string> rows;
};

struct ExperimentOutput {
  std::vector<MetricResult> metrics;
  std::vector<CsvTable> tables;
};

// Core dispatch; fills metrics and plot-ready tables.
ExperimentOutput run_experiment_core(const ExperimentConfig& cfg);

// Dispatch + write <out>/<kind>.csv and <out>/<kind>_manifest.json.
RunManifest run_experiment(const ExperimentConfig& cfg);

int resolve_jobs(int requested);

// Static partition of [0, n) over worker threads; deterministic as long as
// the body writes only to its own slots.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

std::string version_string();

// printf-style %.17g formatting used by every CSV writer (round-trip exact).
std::string fmt_g17(double v);

}  // namespace tdmcfan::harness
