// AVX2/FMA kernel variants. Compiled with -mavx2 -mfma; only reached
// after the runtime CPU check in cpu_has_avx2().

#include <immintrin.h>

#include <cassert>
#include <cmath>

#include "kernels_detail.hpp"

namespace groupmix::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, shuf));
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i + 4),
                           _mm256_loadu_pd(pb + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i),
                           acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    s = std::fma(pa[i], pb[i], s);
  }
  return s;
}

void axpy_avx2(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const std::size_t n = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(py + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), vy);
    _mm256_storeu_pd(py + i, vy);
  }
  for (; i < n; ++i) {
    py[i] = std::fma(alpha, px[i], py[i]);
  }
}

double sum_avx2(std::span<const double> v) {
  const std::size_t n = v.size();
  const double* p = v.data();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    s += p[i];
  }
  return s;
}

double max_avx2(std::span<const double> v) {
  assert(!v.empty());
  const std::size_t n = v.size();
  const double* p = v.data();
  if (n < 4) {
    double m = p[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (p[i] > m) {
        m = p[i];
      }
    }
    return m;
  }
  __m256d acc = _mm256_loadu_pd(p);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_loadu_pd(p + i));
  }
  double m = hmax(acc);
  for (; i < n; ++i) {
    if (p[i] > m) {
      m = p[i];
    }
  }
  return m;
}

double squared_norm_avx2(std::span<const double> v) { return dot_avx2(v, v); }

constexpr KernelTable kAvx2Table{dot_avx2, axpy_avx2, sum_avx2, max_avx2,
                                 squared_norm_avx2};

}  // namespace

const KernelTable& avx2_table() { return kAvx2Table; }

bool cpu_has_avx2() noexcept {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace groupmix::kernels::detail
