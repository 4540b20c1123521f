#include "groupmix/kernels.hpp"

#include <cassert>
#include <cmath>
#include <cstdlib>
#include <cstring>

#include "groupmix/errors.hpp"
#include "kernels_detail.hpp"

namespace groupmix::kernels {

namespace {

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

void axpy_scalar(double alpha, std::span<const double> x,
                 std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] += alpha * x[i];
  }
}

double sum_scalar(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s;
}

double max_scalar(std::span<const double> v) {
  assert(!v.empty());
  double m = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > m) {
      m = v[i];
    }
  }
  return m;
}

double squared_norm_scalar(std::span<const double> v) {
  return dot_scalar(v, v);
}

constexpr detail::KernelTable kScalarTable{
    dot_scalar, axpy_scalar, sum_scalar, max_scalar, squared_norm_scalar};

struct Dispatch {
  const detail::KernelTable* table;
  Backend backend;
};

Dispatch select_initial() {
  Backend want = Backend::scalar;
#ifdef GROUPMIX_HAVE_AVX2
  if (detail::cpu_has_avx2()) {
    want = Backend::avx2;
  }
#endif
  if (const char* env = std::getenv("GROUPMIX_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) {
      want = Backend::scalar;
    } else if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2)) {
      want = Backend::avx2;
    }
  }
#ifdef GROUPMIX_HAVE_AVX2
  if (want == Backend::avx2) {
    return {&detail::avx2_table(), Backend::avx2};
  }
#endif
  return {&kScalarTable, Backend::scalar};
}

Dispatch& dispatch() {
  static Dispatch d = select_initial();
  return d;
}

}  // namespace

Backend active_backend() noexcept { return dispatch().backend; }

bool backend_supported(Backend b) noexcept {
  if (b == Backend::scalar) {
    return true;
  }
#ifdef GROUPMIX_HAVE_AVX2
  return detail::cpu_has_avx2();
#else
  return false;
#endif
}

std::string_view backend_name(Backend b) noexcept {
  return b == Backend::scalar ? "scalar" : "avx2";
}

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw InvalidInput("kernel backend not supported on this build/CPU: " +
                       std::string(backend_name(b)));
  }
  if (b == Backend::scalar) {
    dispatch() = {&kScalarTable, Backend::scalar};
    return;
  }
#ifdef GROUPMIX_HAVE_AVX2
  dispatch() = {&detail::avx2_table(), Backend::avx2};
#endif
}

double dot(std::span<const double> a, std::span<const double> b) {
  return dispatch().table->dot(a, b);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  dispatch().table->axpy(a, x, y);
}

double sum(std::span<const double> v) { return dispatch().table->sum(v); }

double max_value(std::span<const double> v) {
  return dispatch().table->max_value(v);
}

double squared_norm(std::span<const double> v) {
  return dispatch().table->squared_norm(v);
}

double log_sum_exp(std::span<const double> v) {
  assert(!v.empty());
  const double m = max_value(v);
  if (std::isinf(m) && m < 0) {
    return m;  // all terms are -inf
  }
  double s = 0.0;
  for (double x : v) {
    s += std::exp(x - m);
  }
  return m + std::log(s);
}

void softmax(std::span<const double> v, std::span<double> out) {
  assert(v.size() == out.size() && !v.empty());
  const double m = max_value(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
  }
  const double z = sum(out);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] /= z;
  }
}

}  // namespace groupmix::kernels
