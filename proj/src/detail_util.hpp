#pragma once

// Small internal helpers shared across modules: lossless double formatting,
// atomic file writes, and deterministic RNG utilities. The RNG helpers avoid
// std::uniform_*_distribution / std::shuffle on purpose: those are
// implementation-defined, and seeded runs must reproduce exactly.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace fireml::detail {

/// Shortest text form that round-trips an IEEE-754 double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes content to path atomically (temp file in the same directory, then
/// rename). Throws std::runtime_error on I/O failure.
inline void atomic_write(const std::filesystem::path& path,
                         const std::function<void(std::ofstream&)>& writer) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename failed: " + path.string() + ": " + ec.message());
}

/// splitmix64 mix step; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). Modulo bias is irrelevant at our scales and the
/// result is pinned to this exact computation.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

/// In-place Fisher-Yates shuffle with pinned draw order.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace fireml::detail
