#include "fireml/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "detail_util.hpp"

namespace fireml {

ModelFamily family_from_string(const std::string& name) {
  if (name == "rf") return ModelFamily::Rf;
  if (name == "knn") return ModelFamily::Knn;
  if (name == "xgboost") return ModelFamily::Xgboost;
  if (name == "cnn_multi") return ModelFamily::CnnMulti;
  if (name == "cnn_encoder") return ModelFamily::CnnEncoder;
  throw std::invalid_argument("unknown model family '" + name +
                              "' (want rf|knn|xgboost|cnn_multi|cnn_encoder)");
}

std::string family_to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::Rf: return "rf";
    case ModelFamily::Knn: return "knn";
    case ModelFamily::Xgboost: return "xgboost";
    case ModelFamily::CnnMulti: return "cnn_multi";
    case ModelFamily::CnnEncoder: return "cnn_encoder";
  }
  return "?";
}

bool family_is_image(ModelFamily family) {
  return family == ModelFamily::CnnMulti || family == ModelFamily::CnnEncoder;
}

namespace {

std::string join_channels(const std::vector<std::string>& channels) {
  if (channels.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i) s += ",";
    s += channels[i];
  }
  return s;
}

std::vector<std::string> split_channels(const std::string& s) {
  std::vector<std::string> out;
  if (s == "-") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

void save_model(ModelArtifact& artifact, const std::filesystem::path& path) {
  detail::atomic_write(path, [&](std::ofstream& out) {
    out << "fireml-model 1\n";
    out << "family " << family_to_string(artifact.family) << '\n';
    out << "radius_km " << detail::format_double(artifact.prep.radius_km) << '\n';
    out << "channels " << join_channels(artifact.prep.channels) << '\n';
    out << "image " << artifact.prep.image_h << ' ' << artifact.prep.image_w << '\n';
    out << "branch_b " << artifact.prep.branch_b_h << ' ' << artifact.prep.branch_b_w << '\n';
    switch (artifact.family) {
      case ModelFamily::Rf:
        save_forest(artifact.forest.value(), out);
        break;
      case ModelFamily::Knn:
        save_knn(artifact.knn.value(), out);
        break;
      case ModelFamily::Xgboost:
        save_gbt(artifact.gbt.value(), out);
        break;
      case ModelFamily::CnnMulti:
      case ModelFamily::CnnEncoder:
        artifact.net.value().save(out);
        break;
    }
  });
}

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path.string());

  std::string tag, value;
  in >> tag >> value;
  if (tag != "fireml-model" || value != "1")
    throw std::runtime_error(path.string() + " is not a fireml model file");

  ModelArtifact artifact;
  in >> tag;
  if (tag != "family") throw std::runtime_error("model file: expected family line");
  in >> value;
  artifact.family = family_from_string(value);

  in >> tag >> artifact.prep.radius_km;
  if (tag != "radius_km") throw std::runtime_error("model file: expected radius_km line");
  in >> tag >> value;
  if (tag != "channels") throw std::runtime_error("model file: expected channels line");
  artifact.prep.channels = split_channels(value);
  in >> tag >> artifact.prep.image_h >> artifact.prep.image_w;
  if (tag != "image") throw std::runtime_error("model file: expected image line");
  in >> tag >> artifact.prep.branch_b_h >> artifact.prep.branch_b_w;
  if (tag != "branch_b") throw std::runtime_error("model file: expected branch_b line");
  if (!in) throw std::runtime_error("model file: truncated header");

  switch (artifact.family) {
    case ModelFamily::Rf:
      artifact.forest = load_forest(in);
      break;
    case ModelFamily::Knn:
      artifact.knn = load_knn(in);
      break;
    case ModelFamily::Xgboost:
      artifact.gbt = load_gbt(in);
      break;
    case ModelFamily::CnnMulti:
    case ModelFamily::CnnEncoder: {
      in >> std::ws;
      artifact.net = nn::Network::load(in);
      break;
    }
  }
  return artifact;
}

std::array<double, kFeatureCount> model_feature_importance(const ModelArtifact& artifact) {
  switch (artifact.family) {
    case ModelFamily::Rf:
      return feature_importance(artifact.forest.value());
    case ModelFamily::Xgboost:
      return feature_importance(artifact.gbt.value());
    default:
      throw std::invalid_argument("unsupported model: feature importance needs a tree model, got " +
                                  family_to_string(artifact.family));
  }
}

std::vector<double> predict_tabular(const ModelArtifact& artifact,
                                    const std::vector<TabularSample>& samples) {
  std::vector<double> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    double p = 0.0;
    switch (artifact.family) {
      case ModelFamily::Rf:
        p = predict_forest(artifact.forest.value(), s.features);
        break;
      case ModelFamily::Knn:
        p = predict_knn(artifact.knn.value(), s.features);
        break;
      case ModelFamily::Xgboost:
        p = predict_gbt(artifact.gbt.value(), s.features);
        break;
      default:
        throw std::invalid_argument("predict_tabular: " + family_to_string(artifact.family) +
                                    " is an image model");
    }
    preds.push_back(std::max(0.0, p));
  }
  return preds;
}

std::vector<double> predict_images(ModelArtifact& artifact, const nn::NnDataset& data) {
  if (!family_is_image(artifact.family))
    throw std::invalid_argument("predict_images: " + family_to_string(artifact.family) +
                                " is a tabular model");
  std::vector<double> preds = nn::predict(artifact.net.value(), data);
  for (double& p : preds) p = std::max(0.0, p);
  return preds;
}

}  // namespace fireml
