#pragma once

// The executable acceptance suite: every verification criterion with its
// parameters and thresholds pinned, one pass/fail line each.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tdmcfan/harness.hpp"

namespace tdmcfan::acceptance {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  std::vector<harness::MetricResult> metrics;
};

inline constexpr std::uint64_t kDefaultSeed = 71830923;

// Runs all criteria; writes per-experiment CSVs/manifests under out_dir when
// non-empty; logs one line per criterion to `log` when non-null.
std::vector<CriterionResult> verify_all(std::uint64_t seed, const std::string& out_dir,
                                        int jobs, std::ostream* log);

std::string verdict_json(std::uint64_t seed, const std::vector<CriterionResult>& results);

bool all_pass(const std::vector<CriterionResult>& results);

}  // namespace tdmcfan::acceptance
