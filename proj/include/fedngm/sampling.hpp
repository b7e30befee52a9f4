#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fedngm/model.hpp"

namespace fedngm {

enum class CategoricalProjection {
  Normalized,  // clip block outputs at 0 and renormalize
  Softmax,
};

struct SamplerConfig {
  std::size_t burn_in_sweeps = 20;
  CategoricalProjection projection = CategoricalProjection::Normalized;
};

/// Draws n rows in the model's encoded space. Starting from x ~ N(0, I) (uniform one-hot
/// for categorical blocks), each sweep visits the features in schema order and replaces
/// feature j by f(x)_j + N(0, residual_std_j^2), or by a category drawn from the projected
/// output block. Throws ConfigError when the model has no recorded residuals.
EncodedMatrix sample(const GraphicalModel& m, std::size_t n, std::uint64_t seed, const SamplerConfig& cfg = {});

using CellValue = std::variant<double, std::string>;

struct TargetPrediction {
  CellValue value;
  std::vector<double> scores;  // categorical: one output per category
};

struct InferenceResult {
  std::map<std::string, TargetPrediction> targets;
  Eigen::VectorXd encoded;  // full vector at the final iterate
  std::size_t iterations = 0;
  bool converged = false;
};

struct InferenceConfig {
  std::size_t max_iterations = 200;
  double tolerance = 1e-6;
};

/// Clamps the observed features, starts the rest at the training mean and iterates
/// x <- f(x) with re-clamping until the largest change is below the tolerance.
InferenceResult conditional_infer(const GraphicalModel& m, const std::map<std::string, CellValue>& observed,
                                  const std::vector<std::string>& targets, const InferenceConfig& cfg = {});

/// Row-wise conditional inference over a dataset: `observed` columns are read from `data`,
/// every other schema feature starts at the training mean. Returns the final encoded iterate
/// (M x D, in the model's normalized space).
struct BatchInference {
  Eigen::MatrixXd encoded;
  std::size_t iterations = 0;
  bool converged = false;
};
BatchInference infer_batch(const GraphicalModel& m, const Dataset& data, const std::vector<std::string>& observed,
                           const InferenceConfig& cfg = {});

/// Predictions of one feature from all others, row by row: continuous values are
/// de-normalized; categorical blocks are returned as scores (M x cardinality).
Eigen::MatrixXd predict_feature(const GraphicalModel& m, const Dataset& data, const std::string& feature,
                                const InferenceConfig& cfg = {});

}  // namespace fedngm
