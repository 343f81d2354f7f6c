#include <cstdlib>
#include <string_view>

#include "cgwp/simd/kernels.hpp"

namespace cgwp::simd {

#ifdef CGWP_HAVE_AVX2
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#ifdef CGWP_HAVE_AVX2
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_table();
#endif
  return nullptr;
}

const KernelTable& active_kernels() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("CGWP_SIMD");
    if (env && std::string_view(env) == "scalar") return &scalar_kernels();
    const KernelTable* fast = avx2_kernels();
    return fast ? fast : &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace cgwp::simd
