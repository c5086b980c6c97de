#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fireml/preprocess.hpp"

namespace fireml {

/// One node of a regression tree, stored in a flat array. feature < 0 marks
/// a leaf. split_gain is the total squared-error reduction of the split
/// (variance reduction weighted by sample count), kept for importances.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;  // leaf prediction
  int left = -1;
  int right = -1;
  std::int64_t n_samples = 0;
  double split_gain = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at index 0

  double predict(std::span<const double, kFeatureCount> x) const;
};

struct TreeFitConfig {
  int max_depth = 5;
  int min_samples_leaf = 1;
  double leaf_lambda = 0.0;  // leaf value = sum(y) / (count + lambda)
};

/// Greedy CART: exhaustive scan over (feature, midpoint-threshold) candidates
/// maximizing squared-error reduction; stops at max_depth, a pure node, or
/// min_samples_leaf. Throws std::invalid_argument on empty input.
DecisionTree fit_tree(const std::vector<TabularSample>& samples, const TreeFitConfig& config);

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_estimators = 0;
  int max_depth = 0;
  std::uint64_t seed = 0;
  bool bootstrap = true;
};

/// Each tree is fit on a full-size bootstrap resample drawn from a per-tree
/// seed derived from `seed`. bootstrap=false (test hook) fits every tree on
/// the original samples.
ForestModel fit_random_forest(const std::vector<TabularSample>& samples, int n_estimators,
                              int max_depth, std::uint64_t seed, bool bootstrap = true);

/// Mean of per-tree predictions, clipped to >= 0.
double predict_forest(const ForestModel& model, std::span<const double, kFeatureCount> x);

struct KnnModel {
  std::vector<TabularSample> samples;
  int k = 0;
};

/// Validates 1 <= k <= |samples|.
KnnModel fit_knn(std::vector<TabularSample> samples, int k);

/// Mean label of the k nearest stored samples by Euclidean distance over the
/// feature vector; distance ties break toward the lower fire_id.
double predict_knn(const KnnModel& model, std::span<const double, kFeatureCount> x);

struct GbtModel {
  std::vector<DecisionTree> trees;
  double base_score = 0.0;
  double learning_rate = 0.0;
  int n_estimators = 0;
  int max_depth = 0;
  double lambda = 0.0;
  std::vector<double> train_loss;  // mean squared training error after each round
};

/// Squared-error gradient boosting: base score = mean label, each round fits
/// a tree to the residuals with L2-regularized leaf values sum(r)/(count+λ)
/// and contributes learning_rate * tree(x).
GbtModel fit_gbt(const std::vector<TabularSample>& samples, int n_estimators,
                 double learning_rate, int max_depth, double lambda);

/// base_score + learning_rate * sum of tree outputs, clipped to >= 0.
double predict_gbt(const GbtModel& model, std::span<const double, kFeatureCount> x);

/// Per-feature split-gain totals over all trees, normalized to sum to 1.
/// A forest with no splits at all yields the uniform vector.
std::array<double, kFeatureCount> feature_importance(const std::vector<DecisionTree>& trees);
std::array<double, kFeatureCount> feature_importance(const ForestModel& model);
std::array<double, kFeatureCount> feature_importance(const GbtModel& model);

// Text serialization (lossless: doubles are written with round-trip
// precision). Each save writes a self-describing block that the matching
// load consumes.
void save_forest(const ForestModel& model, std::ostream& out);
ForestModel load_forest(std::istream& in);
void save_knn(const KnnModel& model, std::ostream& out);
KnnModel load_knn(std::istream& in);
void save_gbt(const GbtModel& model, std::ostream& out);
GbtModel load_gbt(std::istream& in);

}  // namespace fireml
