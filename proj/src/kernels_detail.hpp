#pragma once

#include <span>

// Per-backend kernel entry points. The AVX2 definitions live in
// kernels_avx2.cpp, which is only compiled on x86-64 with a compiler
// that accepts -mavx2 -mfma.

namespace groupmix::kernels::detail {

struct KernelTable {
  double (*dot)(std::span<const double>, std::span<const double>);
  void (*axpy)(double, std::span<const double>, std::span<double>);
  double (*sum)(std::span<const double>);
  double (*max_value)(std::span<const double>);
  double (*squared_norm)(std::span<const double>);
};

#ifdef GROUPMIX_HAVE_AVX2
const KernelTable& avx2_table();
bool cpu_has_avx2() noexcept;
#endif

}  // namespace groupmix::kernels::detail
