#include "fireml/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "detail_util.hpp"

namespace fireml {

namespace fs = std::filesystem;
using nlohmann::json;

int feature_index(std::string_view name) {
  for (int i = 0; i < kFeatureCount; ++i)
    if (kFeatureNames[i] == name) return i;
  return -1;
}

void RasterGrid::validate() const {
  if (feature_index(feature) < 0)
    throw std::invalid_argument("raster: unknown feature name '" + feature + "'");
  if (!(resolution_m > 0.0))
    throw std::invalid_argument("raster " + feature + ": resolution_m must be > 0");
  if (height < 1 || width < 1)
    throw std::invalid_argument("raster " + feature + ": height and width must be >= 1");
  if (values.size() != static_cast<std::size_t>(height) * width)
    throw std::invalid_argument("raster " + feature + ": values length " +
                                std::to_string(values.size()) + " != height*width " +
                                std::to_string(static_cast<std::size_t>(height) * width));
  for (float v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("raster " + feature + ": non-finite value");
}

const RasterGrid& FeatureStack::raster(std::string_view feature) const {
  int idx = feature_index(feature);
  if (idx < 0) throw std::invalid_argument("unknown feature name '" + std::string(feature) + "'");
  return rasters[idx];
}

void FeatureStack::validate() const {
  for (int i = 0; i < kFeatureCount; ++i) {
    if (rasters[i].feature != kFeatureNames[i])
      throw std::invalid_argument("stack for fire " + std::to_string(fire_id) + ": slot " +
                                  std::to_string(i) + " holds '" + rasters[i].feature +
                                  "', expected '" + std::string(kFeatureNames[i]) + "'");
    rasters[i].validate();
  }
}

void DatasetManifest::validate() const {
  std::map<std::int64_t, int> seen;
  for (const auto& r : records) {
    if (r.duration_days < 0)
      throw std::invalid_argument("record " + std::to_string(r.id) + ": negative duration_days");
    if (++seen[r.id] > 1)
      throw std::invalid_argument("duplicate fire id " + std::to_string(r.id));
    if (!stack_paths.count(r.id))
      throw std::invalid_argument("record " + std::to_string(r.id) + " has no stack path");
  }
}

bool in_target_area(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon))
    throw std::invalid_argument("in_target_area: non-finite coordinates");
  return lat >= 32.7 && lat <= 42.0 && lon >= -124.26 && lon <= -93.5;
}

std::vector<FireRecord> downsample_small_fires(const std::vector<FireRecord>& records,
                                               std::uint64_t seed) {
  std::vector<std::size_t> small;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].duration_days <= 1.0) small.push_back(i);

  std::mt19937_64 rng(seed);
  detail::shuffle(small, rng);
  small.resize(small.size() / 2);  // indices to drop
  std::vector<char> drop(records.size(), 0);
  for (std::size_t i : small) drop[i] = 1;

  std::vector<FireRecord> out;
  out.reserve(records.size() - small.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!drop[i]) out.push_back(records[i]);
  return out;
}

YearSplit split_by_year(const std::vector<FireRecord>& records, int boundary_year) {
  YearSplit split;
  for (const auto& r : records)
    (r.start_year < boundary_year ? split.train : split.test).push_back(r);
  return split;
}

// ---- raster file IO ----

void save_raster(const RasterGrid& grid, const fs::path& path) {
  grid.validate();
  detail::atomic_write(path, [&](std::ofstream& out) {
    json header = {{"feature", grid.feature},
                   {"resolution_m", grid.resolution_m},
                   {"height", grid.height},
                   {"width", grid.width}};
    out << header.dump() << '\n';
    static_assert(sizeof(float) == 4);
    // little-endian hosts write the payload directly
    out.write(reinterpret_cast<const char*>(grid.values.data()),
              static_cast<std::streamsize>(grid.values.size() * sizeof(float)));
  });
}

RasterGrid load_raster(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing raster file: " + path.string());

  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("raster " + path.string() + ": missing header line");

  RasterGrid grid;
  try {
    json header = json::parse(header_line);
    grid.feature = header.at("feature").get<std::string>();
    grid.resolution_m = header.at("resolution_m").get<double>();
    grid.height = header.at("height").get<int>();
    grid.width = header.at("width").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error("raster " + path.string() + ": malformed header: " + e.what());
  }
  if (grid.height < 1 || grid.width < 1)
    throw std::runtime_error("raster " + path.string() + ": header field height/width must be >= 1");

  const std::size_t count = static_cast<std::size_t>(grid.height) * grid.width;
  grid.values.resize(count);
  in.read(reinterpret_cast<char*>(grid.values.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    throw std::runtime_error("raster " + path.string() + ": dimension mismatch, header says " +
                             std::to_string(grid.height) + "x" + std::to_string(grid.width) +
                             " but payload holds " +
                             std::to_string(in.gcount() / static_cast<std::streamsize>(sizeof(float))) +
                             " values");
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("raster " + path.string() +
                             ": dimension mismatch, payload larger than header declares");

  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("raster " + path.string() + ": " + e.what());
  }
  return grid;
}

FeatureStack StackLoader::load(std::int64_t fire_id) const {
  auto it = stack_dirs_.find(fire_id);
  if (it == stack_dirs_.end())
    throw std::runtime_error("no stack registered for fire " + std::to_string(fire_id));

  FeatureStack stack;
  stack.fire_id = fire_id;
  for (int i = 0; i < kFeatureCount; ++i) {
    fs::path raster_path = it->second / (std::string(kFeatureNames[i]) + ".bin");
    if (!fs::exists(raster_path))
      throw std::runtime_error("fire " + std::to_string(fire_id) + ": missing stack file " +
                               raster_path.string());
    stack.rasters[i] = load_raster(raster_path);
    if (stack.rasters[i].feature != kFeatureNames[i])
      throw std::runtime_error("fire " + std::to_string(fire_id) + ": file " +
                               raster_path.string() + " holds feature '" +
                               stack.rasters[i].feature + "'");
  }
  return stack;
}

LoadedDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("missing manifest file: " + manifest_path.string());

  const fs::path base = manifest_path.parent_path();
  LoadedDataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field[6];
    for (int i = 0; i < 6; ++i) {
      if (!std::getline(ss, field[i], i < 5 ? ',' : '\n'))
        throw std::runtime_error("manifest line " + std::to_string(line_no) +
                                 ": expected 6 comma-separated fields");
    }
    FireRecord rec;
    try {
      rec.id = std::stoll(field[0]);
      rec.lat = std::stod(field[1]);
      rec.lon = std::stod(field[2]);
      rec.start_year = std::stoi(field[3]);
      rec.duration_days = std::stod(field[4]);
    } catch (const std::exception&) {
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": malformed numeric field");
    }
    if (rec.duration_days < 0)
      throw std::runtime_error("manifest line " + std::to_string(line_no) +
                               ": field duration_days is negative");
    ds.manifest.records.push_back(rec);
    ds.manifest.stack_paths[rec.id] = base / field[5];
  }
  ds.manifest.validate();
  ds.stacks = StackLoader(ds.manifest.stack_paths);
  return ds;
}

fs::path save_dataset(const std::vector<FireRecord>& records,
                      const std::vector<FeatureStack>& stacks, const fs::path& out_dir) {
  if (records.size() != stacks.size())
    throw std::invalid_argument("save_dataset: records and stacks differ in length");
  fs::create_directories(out_dir);

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id != stacks[i].fire_id)
      throw std::invalid_argument("save_dataset: record/stack id mismatch at index " +
                                  std::to_string(i));
    fs::path stack_dir = out_dir / ("fire_" + std::to_string(records[i].id));
    fs::create_directories(stack_dir);
    for (int f = 0; f < kFeatureCount; ++f)
      save_raster(stacks[i].rasters[f], stack_dir / (std::string(kFeatureNames[f]) + ".bin"));
  }

  fs::path manifest_path = out_dir / "manifest.csv";
  detail::atomic_write(manifest_path, [&](std::ofstream& out) {
    for (const auto& r : records) {
      out << r.id << ',' << detail::format_double(r.lat) << ',' << detail::format_double(r.lon)
          << ',' << r.start_year << ',' << detail::format_double(r.duration_days) << ','
          << "fire_" << r.id << '\n';
    }
  });
  return manifest_path;
}

// ---- synthetic generation ----

RasterGeometry SyntheticGeometry::for_feature(int feature_idx) const {
  switch (feature_idx) {
    case 0:
    case 1:
      return land;
    case 2:
      return slope;
    default:
      return wind;
  }
}

namespace {

// Smooth random field: a coarse lattice of uniform draws, bilinearly
// interpolated up to the full grid. Kept local so the generator stays
// independent of the preprocessing module it is used to test.
RasterGrid smooth_field(std::mt19937_64& rng, std::string feature, const RasterGeometry& geom,
                        double lo, double hi) {
  RasterGrid grid;
  grid.feature = std::move(feature);
  grid.resolution_m = geom.resolution_m;
  grid.height = geom.height;
  grid.width = geom.width;
  grid.values.resize(static_cast<std::size_t>(geom.height) * geom.width);

  const int cells = 6;  // lattice nodes per axis; controls feature scale
  std::vector<double> lattice(cells * cells);
  for (double& v : lattice) v = detail::uniform(rng, lo, hi);

  for (int r = 0; r < geom.height; ++r) {
    double y = geom.height == 1 ? 0.0
                                : static_cast<double>(r) * (cells - 1) / (geom.height - 1);
    int y0 = std::min(static_cast<int>(y), cells - 2);
    double p = y - y0;
    for (int c = 0; c < geom.width; ++c) {
      double x = geom.width == 1 ? 0.0
                                 : static_cast<double>(c) * (cells - 1) / (geom.width - 1);
      int x0 = std::min(static_cast<int>(x), cells - 2);
      double q = x - x0;
      double v00 = lattice[y0 * cells + x0];
      double v10 = lattice[(y0 + 1) * cells + x0];
      double v01 = lattice[y0 * cells + x0 + 1];
      double v11 = lattice[(y0 + 1) * cells + x0 + 1];
      double v = ((1 - p) * v00 + p * v10) * (1 - q) + ((1 - p) * v01 + p * v11) * q;
      grid.at(r, c) = static_cast<float>(v);
    }
  }
  return grid;
}

// Mean of the min-max normalized raster over its planted window: the central
// window at 5 km half-width (clipped to fit) for tc/gc/slope, the whole grid
// for wind. Plain two-pass arithmetic, independent of the kernels module.
double normalized_window_mean(const RasterGrid& grid, bool whole_grid) {
  float lo = grid.values[0];
  float hi = grid.values[0];
  for (float v : grid.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return 0.0;  // degenerate rule: normalized grid is all zeros

  int r0 = 0, r1 = grid.height, c0 = 0, c1 = grid.width;
  if (!whole_grid) {
    int h = static_cast<int>(5000.0 / grid.resolution_m);
    h = std::min(h, (std::min(grid.height, grid.width) - 1) / 2);
    int cr = grid.height / 2;
    int cc = grid.width / 2;
    r0 = cr - h;
    r1 = cr + h + 1;
    c0 = cc - h;
    c1 = cc + h + 1;
  }

  double acc = 0.0;
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c)
      acc += (static_cast<double>(grid.at(r, c)) - static_cast<double>(lo)) / range;
  return acc / (static_cast<double>(r1 - r0) * (c1 - c0));
}

}  // namespace

double planted_duration(const FeatureStack& stack) {
  static constexpr double kWeights[kFeatureCount] = {18.0, 8.0, 5.0, 2.0, 1.0};
  double d = 2.0;
  for (int f = 0; f < kFeatureCount; ++f)
    d += kWeights[f] * normalized_window_mean(stack.rasters[f], /*whole_grid=*/f >= 3);
  return d;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  if (config.n_fires < 1) throw std::invalid_argument("generate_synthetic: n_fires must be >= 1");
  for (int f = 0; f < kFeatureCount; ++f) {
    RasterGeometry g = config.geometry.for_feature(f);
    if (g.height < 1 || g.width < 1 || !(g.resolution_m > 0.0))
      throw std::invalid_argument("generate_synthetic: invalid geometry for feature " +
                                  std::string(kFeatureNames[f]));
  }
  if (config.noise_amplitude < 0.0)
    throw std::invalid_argument("generate_synthetic: noise_amplitude must be >= 0");

  // Value ranges per feature; absolute scale is erased by per-image
  // normalization downstream, these only make the files look plausible.
  static constexpr double kLo[kFeatureCount] = {0.0, 0.0, 0.0, -10.0, -10.0};
  static constexpr double kHi[kFeatureCount] = {100.0, 100.0, 40.0, 10.0, 10.0};

  SyntheticDataset ds;
  ds.records.reserve(config.n_fires);
  ds.stacks.reserve(config.n_fires);
  for (int i = 0; i < config.n_fires; ++i) {
    std::mt19937_64 rng(detail::mix_seed(config.seed, static_cast<std::uint64_t>(i)));

    FeatureStack stack;
    stack.fire_id = i;
    for (int f = 0; f < kFeatureCount; ++f)
      stack.rasters[f] = smooth_field(rng, std::string(kFeatureNames[f]),
                                      config.geometry.for_feature(f), kLo[f], kHi[f]);

    FireRecord rec;
    rec.id = i;
    rec.lat = detail::uniform(rng, 32.7, 42.0);
    rec.lon = detail::uniform(rng, -124.26, -93.5);
    rec.start_year = 2003 + i % 14;
    double noise = config.noise_amplitude == 0.0
                       ? 0.0
                       : detail::uniform(rng, -config.noise_amplitude, config.noise_amplitude);
    rec.duration_days = std::max(0.0, planted_duration(stack) + noise);

    ds.records.push_back(rec);
    ds.stacks.push_back(std::move(stack));
  }
  return ds;
}

}  // namespace fireml
