#include <atomic>
#include <cstdlib>
#include <string>

#include "tdmcfan/simd.hpp"

namespace tdmcfan::simd {

const KernelTable& scalar_kernels();
#if defined(TDMCFAN_HAVE_AVX2)
const KernelTable& avx2_kernels();
#endif

namespace {

bool avx2_available() {
#if defined(TDMCFAN_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect_backend() {
  const char* env = std::getenv("TDMCFAN_SIMD");
  if (env != nullptr) {
    std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && avx2_available()) return Backend::avx2;
    // "auto" or anything unrecognised falls through to detection
  }
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool force_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_available()) return false;
  g_backend.store(b, std::memory_order_relaxed);
  return true;
}

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

const KernelTable& kernels_for(Backend b) {
#if defined(TDMCFAN_HAVE_AVX2)
  if (b == Backend::avx2) return avx2_kernels();
#else
  (void)b;
#endif
  return scalar_kernels();
}

const KernelTable& kernels() { return kernels_for(active_backend()); }

}  // namespace tdmcfan::simd
