#include "fireml/kernels.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"

namespace fireml::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::pair<float, float> minmax(const float* x, std::size_t n) {
  float lo = x[0];
  float hi = x[0];
  for (std::size_t i = 1; i < n; ++i) {
    lo = x[i] < lo ? x[i] : lo;
    hi = x[i] > hi ? x[i] : hi;
  }
  return {lo, hi};
}

void normalize(const float* x, double lo, double range, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>((static_cast<double>(x[i]) - lo) / range);
}

double sum_f32(const float* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
  return acc;
}

void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n) {
  const double s = 1.0 - t;
  for (std::size_t i = 0; i < n; ++i)
    out[i] = s * static_cast<double>(a[i]) + t * static_cast<double>(b[i]);
}

}  // namespace scalar

namespace {

struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  std::pair<float, float> (*minmax)(const float*, std::size_t);
  void (*normalize)(const float*, double, double, float*, std::size_t);
  double (*sum_f32)(const float*, std::size_t);
  void (*lerp_rows)(const float*, const float*, double, double*, std::size_t);
};

constexpr Ops kScalarOps{scalar::dot,       scalar::sum,     scalar::axpy,
                         scalar::minmax,    scalar::normalize, scalar::sum_f32,
                         scalar::lerp_rows};

#if defined(FIREML_HAVE_AVX2_BACKEND)
constexpr Ops kAvx2Ops{avx2::dot,       avx2::sum,       avx2::axpy,
                       avx2::minmax,    avx2::normalize, avx2::sum_f32,
                       avx2::lerp_rows};
#endif

#if defined(FIREML_HAVE_NEON_BACKEND)
constexpr Ops kNeonOps{neon::dot,       neon::sum,       neon::axpy,
                       neon::minmax,    neon::normalize, neon::sum_f32,
                       neon::lerp_rows};
#endif

bool cpu_has_avx2() {
#if defined(FIREML_HAVE_AVX2_BACKEND) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

const Ops* ops_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &kScalarOps;
#if defined(FIREML_HAVE_AVX2_BACKEND)
    case Backend::Avx2:
      return &kAvx2Ops;
#endif
#if defined(FIREML_HAVE_NEON_BACKEND)
    case Backend::Neon:
      return &kNeonOps;
#endif
    default:
      return nullptr;
  }
}

Backend detect_backend() {
#if defined(FIREML_HAVE_NEON_BACKEND)
  return Backend::Neon;  // baseline on aarch64
#else
  if (cpu_has_avx2()) return Backend::Avx2;
  return Backend::Scalar;
#endif
}

std::atomic<const Ops*> g_ops{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

const Ops& ops() {
  const Ops* p = g_ops.load(std::memory_order_acquire);
  if (p == nullptr) {
    Backend b = detect_backend();
    g_backend.store(b, std::memory_order_relaxed);
    p = ops_for(b);
    g_ops.store(p, std::memory_order_release);
  }
  return *p;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) {
  if (b == Backend::Scalar) return true;
#if defined(FIREML_HAVE_AVX2_BACKEND)
  if (b == Backend::Avx2) return cpu_has_avx2();
#endif
#if defined(FIREML_HAVE_NEON_BACKEND)
  if (b == Backend::Neon) return true;
#endif
  return false;
}

Backend active_backend() {
  ops();  // ensure detection ran
  return g_backend.load(std::memory_order_relaxed);
}

void force_backend(Backend b) {
  if (!backend_available(b))
    throw std::invalid_argument(std::string("kernel backend not available: ") +
                                backend_name(b));
  g_backend.store(b, std::memory_order_relaxed);
  g_ops.store(ops_for(b), std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { ops().axpy(alpha, x, y, n); }
std::pair<float, float> minmax(const float* x, std::size_t n) { return ops().minmax(x, n); }
void normalize(const float* x, double lo, double range, float* out, std::size_t n) {
  ops().normalize(x, lo, range, out, n);
}
double sum_f32(const float* x, std::size_t n) { return ops().sum_f32(x, n); }
void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n) {
  ops().lerp_rows(a, b, t, out, n);
}

}  // namespace fireml::kernels
