#pragma once

#include <cstddef>
#include <utility>

// Per-backend entry points. Only the dispatcher in kernels.cpp includes this.

namespace fireml::kernels::scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);
void normalize(const float* x, double lo, double range, float* out, std::size_t n);
double sum_f32(const float* x, std::size_t n);
void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n);
}  // namespace fireml::kernels::scalar

#if defined(__x86_64__) || defined(_M_X64)
#define FIREML_HAVE_AVX2_BACKEND 1
namespace fireml::kernels::avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);
void normalize(const float* x, double lo, double range, float* out, std::size_t n);
double sum_f32(const float* x, std::size_t n);
void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n);
}  // namespace fireml::kernels::avx2
#endif

#if defined(__aarch64__)
#define FIREML_HAVE_NEON_BACKEND 1
namespace fireml::kernels::neon {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
std::pair<float, float> minmax(const float* x, std::size_t n);
void normalize(const float* x, double lo, double range, float* out, std::size_t n);
double sum_f32(const float* x, std::size_t n);
void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n);
}  // namespace fireml::kernels::neon
#endif
