// NEON kernel variants (aarch64 baseline, no extra compile flags needed).

#include "kernels_impl.hpp"

#if defined(FIREML_HAVE_NEON_BACKEND)

#include <arm_neon.h>

namespace fireml::kernels::neon {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

// mul+add (not fma) so results are bit-identical to the scalar reference
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

std::pair<float, float> minmax(const float* x, std::size_t n) {
  std::size_t i = 0;
  float lo = x[0];
  float hi = x[0];
  if (n >= 4) {
    float32x4_t vlo = vld1q_f32(x);
    float32x4_t vhi = vlo;
    for (i = 4; i + 4 <= n; i += 4) {
      float32x4_t v = vld1q_f32(x + i);
      vlo = vminq_f32(vlo, v);
      vhi = vmaxq_f32(vhi, v);
    }
    lo = vminvq_f32(vlo);
    hi = vmaxvq_f32(vhi);
  }
  for (; i < n; ++i) {
    lo = x[i] < lo ? x[i] : lo;
    hi = x[i] > hi ? x[i] : hi;
  }
  return {lo, hi};
}

void normalize(const float* x, double lo, double range, float* out, std::size_t n) {
  const float64x2_t vlo = vdupq_n_f64(lo);
  const float64x2_t vrange = vdupq_n_f64(range);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    float64x2_t d0 = vcvt_f64_f32(vget_low_f32(v));
    float64x2_t d1 = vcvt_f64_f32(vget_high_f32(v));
    d0 = vdivq_f64(vsubq_f64(d0, vlo), vrange);
    d1 = vdivq_f64(vsubq_f64(d1, vlo), vrange);
    vst1q_f32(out + i, vcombine_f32(vcvt_f32_f64(d0), vcvt_f32_f64(d1)));
  }
  for (; i < n; ++i)
    out[i] = static_cast<float>((static_cast<double>(x[i]) - lo) / range);
}

double sum_f32(const float* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(v)));
    acc1 = vaddq_f64(acc1, vcvt_f64_f32(vget_high_f32(v)));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n) {
  const double s = 1.0 - t;
  const float64x2_t vs = vdupq_n_f64(s);
  const float64x2_t vt = vdupq_n_f64(t);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t va = vcvt_f64_f32(vld1_f32(a + i));
    float64x2_t vb = vcvt_f64_f32(vld1_f32(b + i));
    vst1q_f64(out + i, vaddq_f64(vmulq_f64(vs, va), vmulq_f64(vt, vb)));
  }
  for (; i < n; ++i)
    out[i] = s * static_cast<double>(a[i]) + t * static_cast<double>(b[i]);
}

}  // namespace fireml::kernels::neon

#endif  // FIREML_HAVE_NEON_BACKEND
