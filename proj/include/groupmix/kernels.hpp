#pragma once

#include <span>
#include <string_view>

namespace groupmix::kernels {

/// Vector arithmetic used by the scoring and training inner loops.
/// Every primitive has a scalar reference implementation and, on x86-64
/// hardware with AVX2+FMA, a vectorized variant selected once at startup.
/// The two backends agree to floating-point roundoff, not bit-for-bit
/// (different accumulation order); within one process the selected backend
/// never changes unless set_backend is called, so runs are reproducible
/// on a given machine.

enum class Backend { scalar, avx2 };

Backend active_backend() noexcept;
bool backend_supported(Backend) noexcept;
std::string_view backend_name(Backend) noexcept;

/// Switches the active backend (used by the equivalence tests and the
/// GROUPMIX_KERNELS=scalar|avx2 environment override). Throws InvalidInput
/// if the backend is not supported on this build/CPU. Not safe to call
/// concurrently with running kernels.
void set_backend(Backend);

double dot(std::span<const double> a, std::span<const double> b);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

double sum(std::span<const double> v);
double max_value(std::span<const double> v);  // v must be nonempty
double squared_norm(std::span<const double> v);

/// log(sum_i exp(v_i)), shifted by the max so finite inputs never overflow.
double log_sum_exp(std::span<const double> v);

/// out_i = exp(v_i) / sum_j exp(v_j); out must have v.size() elements.
void softmax(std::span<const double> v, std::span<double> out);

}  // namespace groupmix::kernels
