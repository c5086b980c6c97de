#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fireml {

// Fixed feature order used everywhere: tree cover, grass cover, landform
// slope, wind-u, wind-v.
inline constexpr std::array<std::string_view, 5> kFeatureNames = {
    "tc", "gc", "slope", "windu", "windv"};
inline constexpr int kFeatureCount = 5;

/// Index of a feature name in kFeatureNames, or -1 if unknown.
int feature_index(std::string_view name);

/// One fire event. duration_days is the regression label.
struct FireRecord {
  std::int64_t id = 0;
  double lat = 0.0;        // degrees north
  double lon = 0.0;        // degrees east
  int start_year = 0;
  double duration_days = 0.0;
};

/// A single-feature 2-D grid, row-major, with resolution metadata.
struct RasterGrid {
  std::string feature;
  double resolution_m = 0.0;  // meters per pixel
  int height = 0;
  int width = 0;
  std::vector<float> values;  // height*width, row-major

  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }

  /// Throws std::invalid_argument if any type invariant is violated.
  void validate() const;
};

/// The five rasters belonging to one fire, indexed by kFeatureNames order.
struct FeatureStack {
  std::int64_t fire_id = 0;
  std::array<RasterGrid, kFeatureCount> rasters;

  const RasterGrid& raster(std::string_view feature) const;
  void validate() const;
};

/// Parsed manifest: the record list plus where each fire's stack lives.
struct DatasetManifest {
  std::vector<FireRecord> records;
  std::map<std::int64_t, std::filesystem::path> stack_paths;
  int split_boundary_year = 2013;

  void validate() const;
};

// ---- curation protocol ----

/// True iff (lat, lon) lies inside the study bounding box,
/// 32.7..42.0 N and -124.26..-93.5 E, all edges inclusive.
/// Throws std::invalid_argument on non-finite input.
bool in_target_area(double lat, double lon);

/// Removes floor(n_small/2) of the records with duration_days <= 1, chosen by
/// a seeded shuffle; every longer fire survives and input order is preserved.
std::vector<FireRecord> downsample_small_fires(const std::vector<FireRecord>& records,
                                               std::uint64_t seed);

struct YearSplit {
  std::vector<FireRecord> train;  // start_year < boundary
  std::vector<FireRecord> test;   // start_year >= boundary
};

YearSplit split_by_year(const std::vector<FireRecord>& records, int boundary_year);

// ---- portable file formats ----
//
// Raster file: one UTF-8 JSON header line
//   {"feature":"tc","resolution_m":100.0,"height":600,"width":600}
// followed by height*width little-endian IEEE-754 32-bit floats, row-major.
//
// Manifest: UTF-8 text, one record per line:
//   id,lat,lon,start_year,duration_days,stack_dir
// stack_dir is resolved relative to the manifest's directory and must contain
// one raster file per feature, named <feature>.bin.

void save_raster(const RasterGrid& grid, const std::filesystem::path& path);
RasterGrid load_raster(const std::filesystem::path& path);

/// Lazy per-fire stack access over an on-disk dataset.
class StackLoader {
 public:
  StackLoader() = default;
  explicit StackLoader(std::map<std::int64_t, std::filesystem::path> stack_dirs)
      : stack_dirs_(std::move(stack_dirs)) {}

  FeatureStack load(std::int64_t fire_id) const;
  std::size_t size() const { return stack_dirs_.size(); }

 private:
  std::map<std::int64_t, std::filesystem::path> stack_dirs_;
};

struct LoadedDataset {
  DatasetManifest manifest;
  StackLoader stacks;
};

LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest.csv plus one stack directory per fire under out_dir.
/// Returns the manifest path.
std::filesystem::path save_dataset(const std::vector<FireRecord>& records,
                                   const std::vector<FeatureStack>& stacks,
                                   const std::filesystem::path& out_dir);

// ---- synthetic data ----

struct RasterGeometry {
  int height = 0;
  int width = 0;
  double resolution_m = 0.0;
};

struct SyntheticGeometry {
  RasterGeometry land{600, 600, 100.0};   // tc and gc
  RasterGeometry slope{200, 200, 270.0};
  RasterGeometry wind{4, 4, 27830.0};     // windu and windv

  RasterGeometry for_feature(int feature_idx) const;
};

struct SyntheticConfig {
  int n_fires = 0;
  SyntheticGeometry geometry;
  std::uint64_t seed = 0;
  double noise_amplitude = 1.0;  // label noise is uniform in [-a, a]
};

struct SyntheticDataset {
  std::vector<FireRecord> records;
  std::vector<FeatureStack> stacks;  // same order as records
};

/// Deterministic synthetic dataset: smooth random fields per feature, years
/// cycling 2003..2016, coordinates inside the target area, and duration
/// labels planted as
///   2 + 18*v_tc + 8*v_gc + 5*v_slope + 2*v_windu + 1*v_windv + noise
/// where v_f is the mean of the min-max normalized raster over its central
/// window (half-width = min(floor(5000/resolution_m), largest that fits) for
/// tc/gc/slope, the full grid for wind). planted_duration computes the same
/// quantity without noise.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

/// The noiseless planted label for a stack (see generate_synthetic).
double planted_duration(const FeatureStack& stack);

}  // namespace fireml
