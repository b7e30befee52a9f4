#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fedngm {

enum class TargetKind { Continuous, Binary, Categorical };

std::string to_string(TargetKind k);

/// Named metric values; an absent value means the metric is undefined (reported "n/a").
struct MetricRecord {
  TargetKind kind = TargetKind::Continuous;
  std::vector<std::pair<std::string, std::optional<double>>> values;

  std::optional<double> get(const std::string& name) const;
};

/// MAE and RMSE. Throws ConfigError on a length mismatch or empty input.
MetricRecord evaluate_continuous(std::span<const double> truth, std::span<const double> predicted);

/// AUC (trapezoidal ROC, ties averaged) and AUPR (average precision over tied score groups)
/// from positive-class scores. Both are absent when the truth holds a single class.
MetricRecord evaluate_binary(std::span<const int> truth, std::span<const double> positive_scores);

/// Micro- and macro-averaged precision/recall over the classes present in truth or
/// predictions. Recall is 0 for a class with no true labels, precision is 0 for a class that
/// is never predicted.
MetricRecord evaluate_categorical(std::span<const std::size_t> truth, std::span<const std::size_t> predicted);

/// Dispatch on kind. `predicted` holds one column for continuous targets and one score column
/// per class otherwise; `truth` holds values or class indices.
MetricRecord evaluate_predictions(TargetKind kind, std::span<const double> truth, const Eigen::MatrixXd& predicted);

/// One JSON object per metric: {"feature", "kind", "metric", "value"} with "n/a" for absent values.
std::string metrics_to_jsonl(const std::string& label, const std::string& feature, const MetricRecord& r);

}  // namespace fedngm
