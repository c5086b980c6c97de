#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fireml/nn.hpp"
#include "fireml/tabular.hpp"

namespace fireml {

enum class ModelFamily { Rf, Knn, Xgboost, CnnMulti, CnnEncoder };

/// Accepts rf|knn|xgboost|cnn_multi|cnn_encoder; throws std::invalid_argument.
ModelFamily family_from_string(const std::string& name);
std::string family_to_string(ModelFamily family);
bool family_is_image(ModelFamily family);

/// Preprocessing contract stored with every model so evaluation rebuilds the
/// same inputs. channels: the tabular families keep all five features;
/// cnn_multi lists its image channels; cnn_encoder lists exactly two (branch
/// A, branch B).
struct PreprocessSettings {
  double radius_km = 5.0;
  std::vector<std::string> channels;
  int image_h = 100;
  int image_w = 100;
  int branch_b_h = 30;
  int branch_b_w = 30;
};

struct ModelArtifact {
  ModelFamily family = ModelFamily::Rf;
  PreprocessSettings prep;
  std::optional<ForestModel> forest;
  std::optional<KnnModel> knn;
  std::optional<GbtModel> gbt;
  std::optional<nn::Network> net;
};

void save_model(ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

/// Split-gain importances for tree models; throws std::invalid_argument
/// ("unsupported model") for KNN and the networks.
std::array<double, kFeatureCount> model_feature_importance(const ModelArtifact& artifact);

/// Per-sample predictions for a tabular-family artifact, clipped to >= 0.
std::vector<double> predict_tabular(const ModelArtifact& artifact,
                                    const std::vector<TabularSample>& samples);

/// Per-sample predictions for an image-family artifact, clipped to >= 0.
std::vector<double> predict_images(ModelArtifact& artifact, const nn::NnDataset& data);

}  // namespace fireml
