#include "fireml/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "detail_util.hpp"

namespace fireml {

namespace {

void check_paired(const std::vector<double>& preds, const std::vector<double>& labels) {
  if (preds.size() != labels.size())
    throw std::invalid_argument("metrics: got " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  if (preds.empty()) throw std::invalid_argument("metrics: empty prediction set");
}

}  // namespace

double relative_rmse(const std::vector<double>& preds, const std::vector<double>& labels,
                     RelativeRmseDenominator denom) {
  check_paired(preds, labels);
  constexpr double kGuard = 1e-9;
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = denom == RelativeRmseDenominator::Prediction ? preds[i] : labels[i];
    acc += std::abs(labels[i] - preds[i]) / std::max(std::abs(d), kGuard);
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

double rmse_std(const std::vector<double>& preds, const std::vector<double>& labels) {
  check_paired(preds, labels);
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = labels[i] - preds[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

double r2_score(const std::vector<double>& preds, const std::vector<double>& labels) {
  check_paired(preds, labels);
  if (preds.size() < 2) throw std::invalid_argument("r2_score: needs at least two samples");
  double mean = 0.0;
  for (double y : labels) mean += y;
  mean /= static_cast<double>(labels.size());

  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ss_res += (labels[i] - preds[i]) * (labels[i] - preds[i]);
    ss_tot += (labels[i] - mean) * (labels[i] - mean);
  }
  if (ss_tot == 0.0) throw std::domain_error("r2_score: labels have zero variance");
  return 1.0 - ss_res / ss_tot;
}

std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& preds,
                                                      const std::vector<double>& labels,
                                                      double step_days) {
  check_paired(preds, labels);
  if (!(step_days > 0.0)) throw std::invalid_argument("accuracy_curve: step must be > 0");

  const double max_label = *std::max_element(labels.begin(), labels.end());
  std::vector<std::pair<double, double>> curve;
  for (std::size_t k = 0;; ++k) {
    const double c = static_cast<double>(k) * step_days;
    if (c > max_label + 1e-12) break;
    std::size_t total = 0, positive = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < c) continue;
      ++total;
      if (preds[i] >= c) ++positive;
    }
    if (total == 0) continue;
    curve.emplace_back(c, static_cast<double>(positive) / static_cast<double>(total));
  }
  return curve;
}

double worst_case_accuracy(const std::vector<std::pair<double, double>>& curve) {
  if (curve.empty()) throw std::invalid_argument("worst_case_accuracy: empty curve");
  double worst = curve.front().second;
  for (const auto& [c, acc] : curve) worst = std::min(worst, acc);
  return worst;
}

EvaluationReport evaluate(const std::vector<double>& preds, const std::vector<double>& labels,
                          double step_days, RelativeRmseDenominator denom) {
  EvaluationReport report;
  report.predictions = preds;
  report.labels = labels;
  report.relative_rmse = relative_rmse(preds, labels, denom);
  report.rmse_std = rmse_std(preds, labels);
  report.r2 = r2_score(preds, labels);
  report.accuracy_curve = accuracy_curve(preds, labels, step_days);
  report.worst_case_accuracy = worst_case_accuracy(report.accuracy_curve);
  return report;
}

void export_report(const EvaluationReport& report, const std::filesystem::path& path) {
  if (report.predictions.empty() || report.predictions.size() != report.labels.size())
    throw std::invalid_argument("export_report: predictions and labels must be paired");
  if (report.accuracy_curve.empty())
    throw std::invalid_argument("export_report: empty accuracy curve");

  detail::atomic_write(path, [&](std::ofstream& out) {
    for (std::size_t i = 0; i < report.predictions.size(); ++i)
      out << detail::format_double(report.predictions[i]) << ','
          << detail::format_double(report.labels[i]) << '\n';
    out << '\n';
    for (const auto& [c, acc] : report.accuracy_curve)
      out << detail::format_double(c) << ',' << detail::format_double(acc) << '\n';
  });
}

EvaluationReport import_report(const std::filesystem::path& path,
                               RelativeRmseDenominator denom) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file: " + path.string());

  std::vector<double> preds, labels;
  std::vector<std::pair<double, double>> curve;
  std::string line;
  bool in_curve = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      in_curve = true;
      continue;
    }
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b))
      throw std::runtime_error("report " + path.string() + " line " + std::to_string(line_no) +
                               ": expected two comma-separated values");
    try {
      if (in_curve)
        curve.emplace_back(std::stod(a), std::stod(b));
      else {
        preds.push_back(std::stod(a));
        labels.push_back(std::stod(b));
      }
    } catch (const std::exception&) {
      throw std::runtime_error("report " + path.string() + " line " + std::to_string(line_no) +
                               ": malformed number");
    }
  }
  if (preds.empty()) throw std::runtime_error("report " + path.string() + ": no prediction rows");
  if (curve.empty()) throw std::runtime_error("report " + path.string() + ": no curve rows");

  EvaluationReport report;
  report.predictions = std::move(preds);
  report.labels = std::move(labels);
  report.relative_rmse = relative_rmse(report.predictions, report.labels, denom);
  report.rmse_std = rmse_std(report.predictions, report.labels);
  report.r2 = r2_score(report.predictions, report.labels);
  report.accuracy_curve = std::move(curve);
  report.worst_case_accuracy = worst_case_accuracy(report.accuracy_curve);
  return report;
}

}  // namespace fireml
