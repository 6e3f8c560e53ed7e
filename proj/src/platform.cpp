#include "iwn/platform.hpp"

#include <unistd.h>

#include <cstdlib>
#include <string>

namespace iwn {

std::string_view blas_core_hint() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512vl"))
    return "SkylakeX";
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return "Haswell";
#endif
  return {};
}

void reexec_with_blas_core(char** argv) {
#if defined(__linux__)
  if (std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  const auto hint = blas_core_hint();
  if (hint.empty()) return;
  ::setenv("OPENBLAS_CORETYPE", std::string(hint).c_str(), 1);
  ::execv("/proc/self/exe", argv);
#else
  (void)argv;
#endif
}

}  // namespace iwn
