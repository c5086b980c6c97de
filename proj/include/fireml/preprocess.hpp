#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fireml/data_model.hpp"

namespace fireml {

/// Per-fire feature vector: mean of each normalized, radius-cropped raster,
/// in kFeatureNames order, plus the duration label.
struct TabularSample {
  std::int64_t fire_id = 0;
  std::array<double, kFeatureCount> features{};
  double radius_km = 0.0;
  double label = 0.0;
};

/// Channel-major (c, h, w) image stack, double precision for the network.
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int c, int h, int w) const {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
};

/// Min-max normalization to [0,1]. A constant grid maps to all zeros.
RasterGrid minmax_normalize(const RasterGrid& grid);

/// Centered square window of half-width floor(radius_km*1000/resolution_m)
/// pixels around (height/2, width/2). Throws std::out_of_range if the window
/// does not fit.
RasterGrid crop_radius(const RasterGrid& grid, double radius_km);

/// Arithmetic mean of all pixels.
double mean_feature(const RasterGrid& grid);

/// Bilinear resize with align-corners coordinate mapping. Output values never
/// leave [min(input), max(input)]; equal sizes reproduce the input exactly.
RasterGrid bilinear_resize(const RasterGrid& grid, int out_h, int out_w);

/// normalize -> crop -> mean per feature (wind rasters skip the crop and are
/// averaged whole, matching their coarse resolution).
TabularSample to_tabular(const FeatureStack& stack, double radius_km, double label);

/// normalize -> crop -> resize per selected feature, stacked channel-major in
/// subset order (wind rasters skip the crop and are resized up whole).
ImageTensor to_image(const FeatureStack& stack, double radius_km, int target_h, int target_w,
                     const std::vector<std::string>& channel_subset);

}  // namespace fireml
