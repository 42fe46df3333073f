// Acceptance suite runner: one pass/fail line per criterion, nonzero exit on
// any failure.  TDMCFAN_ACCEPT_SEED overrides the pinned default seed.

#include <cstdlib>
#include <iostream>

#include "tdmcfan/acceptance.hpp"
#include "tdmcfan/simd.hpp"

int main() {
  using namespace tdmcfan;
  std::uint64_t seed = acceptance::kDefaultSeed;
  if (const char* env = std::getenv("TDMCFAN_ACCEPT_SEED")) seed = std::strtoull(env, nullptr, 10);
  std::cout << "backend=" << simd::backend_name(simd::active_backend()) << " seed=" << seed
            << "\n";
  auto results = acceptance::verify_all(seed, "", 0, &std::cout);
  bool ok = acceptance::all_pass(results);
  std::cout << (ok ? "ALL CRITERIA PASSED" : "CRITERIA FAILED") << " ("
            << results.size() << " criteria)\n";
  return ok ? 0 : 1;
}
