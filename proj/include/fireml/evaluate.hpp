#pragma once

#include <filesystem>
#include <utility>
#include <vector>

namespace fireml {

/// Which quantity divides the residual in relative_rmse. The headline metric
/// divides by the prediction; dividing by the label is available because the
/// two readings are equally defensible for this statistic.
enum class RelativeRmseDenominator { Prediction, Label };

/// sqrt( mean( |label - pred| / max(|denominator|, 1e-9) ) ). Note this is a
/// relative statistic, not the classic squared-residual RMSE; see rmse_std
/// for that.
double relative_rmse(const std::vector<double>& preds, const std::vector<double>& labels,
                     RelativeRmseDenominator denom = RelativeRmseDenominator::Prediction);

/// Classic sqrt(mean squared residual), reported alongside for sanity.
double rmse_std(const std::vector<double>& preds, const std::vector<double>& labels);

/// 1 - SS_res/SS_tot. Throws std::domain_error when the labels have no
/// variance, and std::invalid_argument for fewer than two samples.
double r2_score(const std::vector<double>& preds, const std::vector<double>& labels);

/// For each critical value c in {0, step, 2*step, ...} up to max(label):
/// restrict to samples with label >= c and report the fraction whose
/// prediction is also >= c. Critical values whose restriction is empty are
/// omitted (cannot happen below the maximum label).
std::vector<std::pair<double, double>> accuracy_curve(const std::vector<double>& preds,
                                                      const std::vector<double>& labels,
                                                      double step_days = 1.0);

/// Minimum accuracy over the curve.
double worst_case_accuracy(const std::vector<std::pair<double, double>>& curve);

struct EvaluationReport {
  std::vector<double> predictions;
  std::vector<double> labels;
  double relative_rmse = 0.0;
  double rmse_std = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> accuracy_curve;  // (critical value, accuracy)
  double worst_case_accuracy = 0.0;
};

/// Computes every metric from paired predictions/labels.
EvaluationReport evaluate(const std::vector<double>& preds, const std::vector<double>& labels,
                          double step_days = 1.0,
                          RelativeRmseDenominator denom = RelativeRmseDenominator::Prediction);

/// Report file: UTF-8 CSV. Section one holds `pred,label` rows, a blank line,
/// then section two holds `critical_value,accuracy` rows. Doubles use
/// round-trip precision so export/import is lossless.
void export_report(const EvaluationReport& report, const std::filesystem::path& path);
EvaluationReport import_report(const std::filesystem::path& path,
                               RelativeRmseDenominator denom = RelativeRmseDenominator::Prediction);

}  // namespace fireml
