#pragma once

#include <string_view>

namespace iwn {

/// OpenBLAS kernel name matching this CPU's vector extensions, or empty.
/// DYNAMIC_ARCH builds of OpenBLAS fall back to a generic SSE3 kernel on CPUs
/// they do not recognise (common under virtualisation), which is ~5x slower.
std::string_view blas_core_hint();

/// If OPENBLAS_CORETYPE is unset and a hint applies, sets it and re-executes
/// the running binary so the BLAS library sees it at load time. Returns
/// normally when nothing was done or exec failed.
void reexec_with_blas_core(char** argv);

}  // namespace iwn
