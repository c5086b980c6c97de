#include "fireml/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "detail_util.hpp"

namespace fireml {

double DecisionTree::predict(std::span<const double, kFeatureCount> x) const {
  int idx = 0;
  while (!nodes[idx].is_leaf())
    idx = x[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
  return nodes[idx].value;
}

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best split by squared-error reduction. Candidates are midpoints between
// consecutive distinct sorted values; enumeration order (feature ascending,
// threshold ascending) breaks exact ties, and a new candidate must be
// strictly better to win.
SplitChoice best_split(const std::vector<std::array<double, kFeatureCount>>& x,
                       const std::vector<double>& y, const std::vector<int>& idx,
                       int min_samples_leaf) {
  const int n = static_cast<int>(idx.size());
  double total = 0.0, total_sq = 0.0;
  for (int i : idx) {
    total += y[i];
    total_sq += y[i] * y[i];
  }
  const double parent_sse = total_sq - total * total / n;

  SplitChoice best;
  std::vector<int> order(idx);
  for (int f = 0; f < kFeatureCount; ++f) {
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return x[a][f] < x[b][f]; });
    double left_sum = 0.0, left_sq = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double yi = y[order[i]];
      left_sum += yi;
      left_sq += yi * yi;
      const double xa = x[order[i]][f];
      const double xb = x[order[i + 1]][f];
      if (xa == xb) continue;  // not a boundary between distinct values
      const int nl = i + 1;
      const int nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      const double right_sum = total - left_sum;
      const double right_sq = total_sq - left_sq;
      const double sse_l = left_sq - left_sum * left_sum / nl;
      const double sse_r = right_sq - right_sum * right_sum / nr;
      const double gain = parent_sse - (sse_l + sse_r);
      if (!best.found || gain > best.gain) {
        best.found = true;
        best.feature = f;
        best.threshold = xa + (xb - xa) / 2.0;
        best.gain = gain;
      }
    }
  }
  return best;
}

struct TreeBuilder {
  const std::vector<std::array<double, kFeatureCount>>& x;
  const std::vector<double>& y;
  TreeFitConfig cfg;
  std::vector<TreeNode> nodes;

  int build(std::vector<int> idx, int depth) {
    const int n = static_cast<int>(idx.size());
    double sum = 0.0;
    for (int i : idx) sum += y[i];

    TreeNode node;
    node.n_samples = n;
    node.value = sum / (n + cfg.leaf_lambda);

    bool stop = depth >= cfg.max_depth || n < 2 * cfg.min_samples_leaf;
    SplitChoice split;
    if (!stop) {
      split = best_split(x, y, idx, cfg.min_samples_leaf);
      stop = !split.found || !(split.gain > 0.0);
    }
    if (stop) {
      nodes.push_back(node);
      return static_cast<int>(nodes.size()) - 1;
    }

    node.feature = split.feature;
    node.threshold = split.threshold;
    node.split_gain = split.gain;
    const int self = static_cast<int>(nodes.size());
    nodes.push_back(node);

    std::vector<int> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (int i : idx)
      (x[i][split.feature] <= split.threshold ? left_idx : right_idx).push_back(i);

    nodes[self].left = build(std::move(left_idx), depth + 1);
    nodes[self].right = build(std::move(right_idx), depth + 1);
    return self;
  }
};

DecisionTree fit_tree_xy(const std::vector<std::array<double, kFeatureCount>>& x,
                         const std::vector<double>& y, const TreeFitConfig& cfg) {
  if (x.empty()) throw std::invalid_argument("fit_tree: empty sample set");
  if (cfg.max_depth < 0) throw std::invalid_argument("fit_tree: max_depth must be >= 0");
  if (cfg.min_samples_leaf < 1)
    throw std::invalid_argument("fit_tree: min_samples_leaf must be >= 1");

  TreeBuilder builder{x, y, cfg, {}};
  std::vector<int> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  builder.build(std::move(idx), 0);
  return DecisionTree{std::move(builder.nodes)};
}

void split_samples(const std::vector<TabularSample>& samples,
                   std::vector<std::array<double, kFeatureCount>>& x, std::vector<double>& y) {
  x.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    x.push_back(s.features);
    y.push_back(s.label);
  }
}

}  // namespace

DecisionTree fit_tree(const std::vector<TabularSample>& samples, const TreeFitConfig& config) {
  std::vector<std::array<double, kFeatureCount>> x;
  std::vector<double> y;
  split_samples(samples, x, y);
  return fit_tree_xy(x, y, config);
}

ForestModel fit_random_forest(const std::vector<TabularSample>& samples, int n_estimators,
                              int max_depth, std::uint64_t seed, bool bootstrap) {
  if (samples.empty()) throw std::invalid_argument("fit_random_forest: empty sample set");
  if (n_estimators < 1)
    throw std::invalid_argument("fit_random_forest: n_estimators must be >= 1");

  std::vector<std::array<double, kFeatureCount>> x;
  std::vector<double> y;
  split_samples(samples, x, y);

  ForestModel model;
  model.n_estimators = n_estimators;
  model.max_depth = max_depth;
  model.seed = seed;
  model.bootstrap = bootstrap;
  model.trees.reserve(n_estimators);

  const std::size_t n = samples.size();
  TreeFitConfig cfg;
  cfg.max_depth = max_depth;
  for (int t = 0; t < n_estimators; ++t) {
    if (!bootstrap) {
      model.trees.push_back(fit_tree_xy(x, y, cfg));
      continue;
    }
    std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::array<double, kFeatureCount>> bx(n);
    std::vector<double> by(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = static_cast<std::size_t>(detail::bounded(rng, n));
      bx[i] = x[j];
      by[i] = y[j];
    }
    model.trees.push_back(fit_tree_xy(bx, by, cfg));
  }
  return model;
}

double predict_forest(const ForestModel& model, std::span<const double, kFeatureCount> x) {
  double acc = 0.0;
  for (const auto& tree : model.trees) acc += tree.predict(x);
  return std::max(0.0, acc / static_cast<double>(model.trees.size()));
}

KnnModel fit_knn(std::vector<TabularSample> samples, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > samples.size())
    throw std::invalid_argument("fit_knn: k must satisfy 1 <= k <= |samples|, got k=" +
                                std::to_string(k) + " with " + std::to_string(samples.size()) +
                                " samples");
  return KnnModel{std::move(samples), k};
}

double predict_knn(const KnnModel& model, std::span<const double, kFeatureCount> x) {
  struct Neighbor {
    double dist_sq;
    std::int64_t fire_id;
    double label;
  };
  std::vector<Neighbor> neighbors;
  neighbors.reserve(model.samples.size());
  for (const auto& s : model.samples) {
    double d = 0.0;
    for (int f = 0; f < kFeatureCount; ++f) {
      const double diff = x[f] - s.features[f];
      d += diff * diff;
    }
    neighbors.push_back({d, s.fire_id, s.label});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    return a.fire_id < b.fire_id;
  };
  std::partial_sort(neighbors.begin(), neighbors.begin() + model.k, neighbors.end(), closer);

  double acc = 0.0;
  for (int i = 0; i < model.k; ++i) acc += neighbors[i].label;
  return acc / static_cast<double>(model.k);
}

GbtModel fit_gbt(const std::vector<TabularSample>& samples, int n_estimators,
                 double learning_rate, int max_depth, double lambda) {
  if (samples.empty()) throw std::invalid_argument("fit_gbt: empty sample set");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("fit_gbt: learning_rate must be > 0");
  if (lambda < 0.0) throw std::invalid_argument("fit_gbt: lambda must be >= 0");
  if (n_estimators < 0) throw std::invalid_argument("fit_gbt: n_estimators must be >= 0");

  std::vector<std::array<double, kFeatureCount>> x;
  std::vector<double> y;
  split_samples(samples, x, y);
  const std::size_t n = samples.size();

  GbtModel model;
  model.learning_rate = learning_rate;
  model.n_estimators = n_estimators;
  model.max_depth = max_depth;
  model.lambda = lambda;
  model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> pred(n, model.base_score);
  std::vector<double> residual(n);
  TreeFitConfig cfg;
  cfg.max_depth = max_depth;
  cfg.leaf_lambda = lambda;
  model.trees.reserve(n_estimators);
  for (int round = 0; round < n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
    DecisionTree tree = fit_tree_xy(x, residual, cfg);
    for (std::size_t i = 0; i < n; ++i)
      pred[i] += learning_rate * tree.predict(std::span<const double, kFeatureCount>(x[i]));
    model.trees.push_back(std::move(tree));

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - pred[i];
      sse += r * r;
    }
    model.train_loss.push_back(sse / static_cast<double>(n));
  }
  return model;
}

double predict_gbt(const GbtModel& model, std::span<const double, kFeatureCount> x) {
  double acc = model.base_score;
  for (const auto& tree : model.trees) acc += model.learning_rate * tree.predict(x);
  return std::max(0.0, acc);
}

std::array<double, kFeatureCount> feature_importance(const std::vector<DecisionTree>& trees) {
  std::array<double, kFeatureCount> gains{};
  double total = 0.0;
  for (const auto& tree : trees)
    for (const auto& node : tree.nodes)
      if (!node.is_leaf()) {
        gains[node.feature] += node.split_gain;
        total += node.split_gain;
      }
  if (total <= 0.0) {
    gains.fill(1.0 / kFeatureCount);
    return gains;
  }
  for (double& g : gains) g /= total;
  return gains;
}

std::array<double, kFeatureCount> feature_importance(const ForestModel& model) {
  return feature_importance(model.trees);
}

std::array<double, kFeatureCount> feature_importance(const GbtModel& model) {
  return feature_importance(model.trees);
}

// ---- serialization ----

namespace {

void save_tree(const DecisionTree& tree, std::ostream& out) {
  out << "tree " << tree.nodes.size() << '\n';
  for (const auto& n : tree.nodes) {
    if (n.is_leaf())
      out << "leaf " << detail::format_double(n.value) << ' ' << n.n_samples << '\n';
    else
      out << "split " << n.feature << ' ' << detail::format_double(n.threshold) << ' ' << n.left
          << ' ' << n.right << ' ' << n.n_samples << ' ' << detail::format_double(n.split_gain)
          << '\n';
  }
}

DecisionTree load_tree(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  in >> tag >> count;
  if (tag != "tree" || !in) throw std::runtime_error("model file: expected tree block");
  DecisionTree tree;
  tree.nodes.resize(count);
  for (auto& n : tree.nodes) {
    in >> tag;
    if (tag == "leaf") {
      in >> n.value >> n.n_samples;
    } else if (tag == "split") {
      in >> n.feature >> n.threshold >> n.left >> n.right >> n.n_samples >> n.split_gain;
    } else {
      throw std::runtime_error("model file: bad tree node tag '" + tag + "'");
    }
    if (!in) throw std::runtime_error("model file: truncated tree node");
  }
  return tree;
}

void expect_tag(std::istream& in, const std::string& want) {
  std::string tag;
  in >> tag;
  if (!in || tag != want)
    throw std::runtime_error("model file: expected '" + want + "', got '" + tag + "'");
}

}  // namespace

void save_forest(const ForestModel& model, std::ostream& out) {
  out << "forest " << model.n_estimators << ' ' << model.max_depth << ' ' << model.seed << ' '
      << (model.bootstrap ? 1 : 0) << '\n';
  for (const auto& tree : model.trees) save_tree(tree, out);
}

ForestModel load_forest(std::istream& in) {
  expect_tag(in, "forest");
  ForestModel model;
  int bootstrap = 1;
  in >> model.n_estimators >> model.max_depth >> model.seed >> bootstrap;
  if (!in) throw std::runtime_error("model file: bad forest header");
  model.bootstrap = bootstrap != 0;
  model.trees.reserve(model.n_estimators);
  for (int i = 0; i < model.n_estimators; ++i) model.trees.push_back(load_tree(in));
  return model;
}

void save_knn(const KnnModel& model, std::ostream& out) {
  out << "knn " << model.k << ' ' << model.samples.size() << '\n';
  for (const auto& s : model.samples) {
    out << s.fire_id;
    for (double f : s.features) out << ' ' << detail::format_double(f);
    out << ' ' << detail::format_double(s.radius_km) << ' ' << detail::format_double(s.label)
        << '\n';
  }
}

KnnModel load_knn(std::istream& in) {
  expect_tag(in, "knn");
  KnnModel model;
  std::size_t count = 0;
  in >> model.k >> count;
  if (!in) throw std::runtime_error("model file: bad knn header");
  model.samples.resize(count);
  for (auto& s : model.samples) {
    in >> s.fire_id;
    for (double& f : s.features) in >> f;
    in >> s.radius_km >> s.label;
    if (!in) throw std::runtime_error("model file: truncated knn sample");
  }
  return model;
}

void save_gbt(const GbtModel& model, std::ostream& out) {
  out << "gbt " << model.n_estimators << ' ' << detail::format_double(model.learning_rate) << ' '
      << model.max_depth << ' ' << detail::format_double(model.lambda) << ' '
      << detail::format_double(model.base_score) << '\n';
  out << "train_loss " << model.train_loss.size();
  for (double l : model.train_loss) out << ' ' << detail::format_double(l);
  out << '\n';
  for (const auto& tree : model.trees) save_tree(tree, out);
}

GbtModel load_gbt(std::istream& in) {
  expect_tag(in, "gbt");
  GbtModel model;
  in >> model.n_estimators >> model.learning_rate >> model.max_depth >> model.lambda >>
      model.base_score;
  if (!in) throw std::runtime_error("model file: bad gbt header");
  expect_tag(in, "train_loss");
  std::size_t count = 0;
  in >> count;
  model.train_loss.resize(count);
  for (double& l : model.train_loss) in >> l;
  if (!in) throw std::runtime_error("model file: truncated gbt loss history");
  model.trees.reserve(model.n_estimators);
  for (int i = 0; i < model.n_estimators; ++i) model.trees.push_back(load_tree(in));
  return model;
}

}  // namespace fireml
