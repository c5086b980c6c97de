#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fireml/model_io.hpp"

namespace fireml {

/// Ordered parameter grid for one model family. Candidate values are kept as
/// strings and parsed per family; the Cartesian product is enumerated with
/// the last parameter varying fastest.
struct SearchSpace {
  ModelFamily family = ModelFamily::Rf;
  std::vector<std::pair<std::string, std::vector<std::string>>> params;
};

/// The stock grids: rf n{5,10,20,50,100} d{1,5,10,20,50}; knn k{5,10,20,50};
/// xgboost n{5,10,20,50} l{0.05,0.1,0.02} d{1,5,10,20,50}; both networks
/// batch{32,64,128,256} epochs{10,20,50,100} optimizer{sgd,adam}.
SearchSpace default_search_space(ModelFamily family);

enum class SelectionMetric { RelativeRmse, WorstCaseAccuracy };

struct ConfigResult {
  std::vector<std::pair<std::string, std::string>> config;  // param -> chosen value
  double relative_rmse = 0.0;
  double worst_case_accuracy = 0.0;
};

struct SearchResult {
  std::vector<ConfigResult> rows;  // enumeration order
  std::size_t best_index = 0;
  SelectionMetric metric = SelectionMetric::RelativeRmse;
};

/// Preprocessed train/eval splits. Tabular families use the sample vectors;
/// the network families use the image datasets.
struct GridDataset {
  std::vector<TabularSample> train_tabular;
  std::vector<TabularSample> eval_tabular;
  nn::NnDataset train_images;
  nn::NnDataset eval_images;
};

/// Trains one model per configuration (seeds derived deterministically from
/// `seed` and the enumeration index), records both metrics for every row,
/// and selects the best by `metric` (min relative RMSE / max worst-case
/// accuracy; exact ties keep the earlier row). Throws std::invalid_argument
/// for parameter names the family does not define.
SearchResult grid_search(const SearchSpace& space, const GridDataset& data, std::uint64_t seed,
                         SelectionMetric metric = SelectionMetric::RelativeRmse);

/// CSV export: a header row naming the columns, one row per configuration,
/// a blank line, then the best row again.
void export_search_result(const SearchResult& result, const std::filesystem::path& path);

}  // namespace fireml
