#include "fireml/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fireml/kernels.hpp"

namespace fireml {

RasterGrid minmax_normalize(const RasterGrid& grid) {
  if (grid.values.empty()) throw std::invalid_argument("minmax_normalize: empty grid");

  RasterGrid out = grid;
  auto [lo, hi] = kernels::minmax(grid.values.data(), grid.values.size());
  if (lo == hi) {
    std::fill(out.values.begin(), out.values.end(), 0.0f);
    return out;
  }
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  kernels::normalize(grid.values.data(), static_cast<double>(lo), range, out.values.data(),
                     grid.values.size());
  return out;
}

RasterGrid crop_radius(const RasterGrid& grid, double radius_km) {
  if (!(radius_km > 0.0)) throw std::invalid_argument("crop_radius: radius_km must be > 0");

  const int h = static_cast<int>(radius_km * 1000.0 / grid.resolution_m);
  const int window = 2 * h + 1;
  if (window > std::min(grid.height, grid.width))
    throw std::out_of_range("crop_radius: half-width " + std::to_string(h) + " needs a " +
                            std::to_string(window) + "-pixel window but grid is " +
                            std::to_string(grid.height) + "x" + std::to_string(grid.width));

  const int cr = grid.height / 2;
  const int cc = grid.width / 2;
  RasterGrid out;
  out.feature = grid.feature;
  out.resolution_m = grid.resolution_m;
  out.height = window;
  out.width = window;
  out.values.resize(static_cast<std::size_t>(window) * window);
  for (int r = 0; r < window; ++r) {
    const float* src = grid.values.data() + static_cast<std::size_t>(cr - h + r) * grid.width +
                       (cc - h);
    std::copy(src, src + window, out.values.data() + static_cast<std::size_t>(r) * window);
  }
  return out;
}

double mean_feature(const RasterGrid& grid) {
  if (grid.values.empty()) throw std::invalid_argument("mean_feature: empty grid");
  return kernels::sum_f32(grid.values.data(), grid.values.size()) /
         static_cast<double>(grid.values.size());
}

namespace {

// align-corners source coordinate for an output index
inline double src_coord(int out_idx, int out_size, int in_size) {
  if (out_size == 1) return (in_size - 1) / 2.0;
  return static_cast<double>(out_idx) * (in_size - 1) / (out_size - 1);
}

}  // namespace

RasterGrid bilinear_resize(const RasterGrid& grid, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("bilinear_resize: output dimensions must be >= 1");

  RasterGrid out;
  out.feature = grid.feature;
  // preserve physical extent per pixel along the resized width
  out.resolution_m = grid.resolution_m * grid.width / out_w;
  out.height = out_h;
  out.width = out_w;
  out.values.resize(static_cast<std::size_t>(out_h) * out_w);

  auto [lo, hi] = kernels::minmax(grid.values.data(), grid.values.size());
  const double dlo = lo;
  const double dhi = hi;

  std::vector<double> row(grid.width);
  for (int oi = 0; oi < out_h; ++oi) {
    const double sy = src_coord(oi, out_h, grid.height);
    int i0 = std::min(static_cast<int>(sy), grid.height - 1);
    int i1 = std::min(i0 + 1, grid.height - 1);
    const double p = sy - i0;
    kernels::lerp_rows(grid.values.data() + static_cast<std::size_t>(i0) * grid.width,
                       grid.values.data() + static_cast<std::size_t>(i1) * grid.width, p,
                       row.data(), grid.width);
    for (int oj = 0; oj < out_w; ++oj) {
      const double sx = src_coord(oj, out_w, grid.width);
      int j0 = std::min(static_cast<int>(sx), grid.width - 1);
      int j1 = std::min(j0 + 1, grid.width - 1);
      const double q = sx - j0;
      double v = (1.0 - q) * row[j0] + q * row[j1];
      v = std::clamp(v, dlo, dhi);
      out.values[static_cast<std::size_t>(oi) * out_w + oj] = static_cast<float>(v);
    }
  }
  return out;
}

namespace {

inline bool is_wind(int feature_idx) { return feature_idx >= 3; }

}  // namespace

TabularSample to_tabular(const FeatureStack& stack, double radius_km, double label) {
  TabularSample sample;
  sample.fire_id = stack.fire_id;
  sample.radius_km = radius_km;
  sample.label = label;
  for (int f = 0; f < kFeatureCount; ++f) {
    RasterGrid normalized = minmax_normalize(stack.rasters[f]);
    sample.features[f] =
        is_wind(f) ? mean_feature(normalized) : mean_feature(crop_radius(normalized, radius_km));
  }
  return sample;
}

ImageTensor to_image(const FeatureStack& stack, double radius_km, int target_h, int target_w,
                     const std::vector<std::string>& channel_subset) {
  if (channel_subset.empty()) throw std::invalid_argument("to_image: empty channel subset");
  if (target_h < 1 || target_w < 1)
    throw std::invalid_argument("to_image: target dimensions must be >= 1");

  ImageTensor img;
  img.channels = static_cast<int>(channel_subset.size());
  img.height = target_h;
  img.width = target_w;
  img.values.reserve(static_cast<std::size_t>(img.channels) * target_h * target_w);
  for (const std::string& name : channel_subset) {
    int f = feature_index(name);
    if (f < 0) throw std::invalid_argument("to_image: unknown feature '" + name + "'");
    RasterGrid g = minmax_normalize(stack.rasters[f]);
    if (!is_wind(f)) g = crop_radius(g, radius_km);
    g = bilinear_resize(g, target_h, target_w);
    img.values.insert(img.values.end(), g.values.begin(), g.values.end());
  }
  return img;
}

}  // namespace fireml
