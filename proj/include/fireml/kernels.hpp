#pragma once

#include <cstddef>
#include <utility>

// Data-parallel inner loops shared by the preprocessing and network code.
//
// Every operation has a scalar reference implementation plus SIMD variants
// (AVX2 on x86-64, NEON on aarch64) selected once at startup from CPU
// features. Elementwise operations (axpy, normalize, lerp_rows) perform the
// same per-element operation sequence in every backend and are therefore
// bit-identical across backends; reductions (dot, sum, sum_f32) accumulate
// in a different order under SIMD and agree with the scalar reference only
// up to rounding. Within one backend all results are exactly reproducible.

namespace fireml::kernels {

enum class Backend { Scalar, Avx2, Neon };

const char* backend_name(Backend b);
bool backend_available(Backend b);

/// Backend currently in use (auto-detected at startup).
Backend active_backend();

/// Override the active backend, e.g. to pin the scalar reference in tests.
/// Throws std::invalid_argument if the backend is not available on this CPU.
void force_backend(Backend b);

// ---- f64 kernels (network arithmetic) ----

/// sum_i a[i]*b[i]
double dot(const double* a, const double* b, std::size_t n);

/// sum_i x[i]
double sum(const double* x, std::size_t n);

/// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n);

// ---- f32 kernels (raster arithmetic) ----

/// {min, max} over x. n must be >= 1.
std::pair<float, float> minmax(const float* x, std::size_t n);

/// out[i] = float((double(x[i]) - lo) / range)
void normalize(const float* x, double lo, double range, float* out, std::size_t n);

/// sum_i x[i], accumulated in double.
double sum_f32(const float* x, std::size_t n);

/// out[i] = (1-t)*a[i] + t*b[i], computed in double.
void lerp_rows(const float* a, const float* b, double t, double* out, std::size_t n);

}  // namespace fireml::kernels
