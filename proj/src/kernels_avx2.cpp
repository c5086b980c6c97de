// AVX2 kernel variants. This translation unit is compiled with -mavx2 -mfma;
// the dispatcher only routes here after checking CPU support at runtime.

#include "kernels_impl.hpp"

#if defined(FIREML_HAVE_AVX2_BACKEND)

#include <immintrin.h>

namespace fireml::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

// mul+add (not fma) so results are bit-identical to the scalar reference
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

std::pair<float, float> minmax(const float* x, std::size_t n) {
  std::size_t i = 0;
  float lo = x[0];
  float hi = x[0];
  if (n >= 8) {
    __m256 vlo = _mm256_loadu_ps(x);
    __m256 vhi = vlo;
    for (i = 8; i + 8 <= n; i += 8) {
      __m256 v = _mm256_loadu_ps(x + i);
      vlo = _mm256_min_ps(vlo, v);
      vhi = _mm256_max_ps(vhi, v);
    }
    alignas(32) float tmp[8];
    _mm256_store_ps(tmp, vlo);
    lo = tmp[0];
    for (int k = 1; k < 8; ++k) lo = tmp[k] < lo ? tmp[k] : lo;
    _mm256_store_ps(tmp, vhi);
    hi = tmp[0];
    for (int k = 1; k < 8; ++k) hi = tmp[k] > hi ? tmp[k] : hi;
  }
  for (; i < n; ++i) {
    lo = x[i] < lo ? x[i] : lo;
    hi = x[i] > hi ? x[i] : hi;
  }
  return {lo, hi};
}

void normalize(const float* x, double lo, double range, float* out, std::size_t n) {
  const __m256d vlo = _mm256_set1_pd(lo);
  const __m256d vrange = _mm256_set1_pd(range);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    v = _mm256_div_pd(_mm256_sub_pd(v, vlo), vrange);
    _mm_storeu_ps(out + i, _mm256_cvtpd_ps(v));
  }
  for (; i < n; ++i)
    out[i] = static_cast<float>((static_cast<double>(x[i]) - lo) / range);
}

double sum_f32(const float* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n) {
  const double s = 1.0 - t;
  const __m256d vs = _mm256_set1_pd(s);
  const __m256d vt = _mm256_set1_pd(t);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
    __m256d vb = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(vs, va), _mm256_mul_pd(vt, vb)));
  }
  for (; i < n; ++i)
    out[i] = s * static_cast<double>(a[i]) + t * static_cast<double>(b[i]);
}

}  // namespace fireml::kernels::avx2

#endif  // FIREML_HAVE_AVX2_BACKEND
