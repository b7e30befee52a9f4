#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedngm/federation.hpp"
#include "fedngm/metrics.hpp"
#include "fedngm/synth.hpp"

namespace fedngm {

/// Synthetic replay of the federated evaluation protocol: one GGM population, biased client
/// splits plus a public hold-out, federation, k-fold CV of client models on their own data,
/// and every model scored on the public split.
struct ScenarioConfig {
  std::string name = "default";
  std::size_t n_features = 20;
  std::string structure = "chain";  // "chain" or "random"
  double edge_density = 0.1;        // structure == "random"
  std::size_t rows_per_client = 5000;
  std::size_t n_clients = 3;
  double public_fraction = 0.2;
  double bias_fraction = 0.6;
  std::size_t n_binary = 1;       // trailing features thresholded into {0,1}
  std::size_t n_categorical = 1;  // trailing features binned into {low,mid,high}
  std::size_t cv_folds = 5;
  std::vector<std::string> targets;  // empty: first two continuous + every discrete feature
  FederationConfig federation;
  std::uint64_t seed = 0;

  static ScenarioConfig defaults();
};

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base = ScenarioConfig::defaults());

/// Test-fold index lists of a seeded k-fold partition of [0, n).
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Kind of a schema feature as an evaluation target.
TargetKind target_kind(const Feature& f);

/// Scores `m` on each target of `data`, predicting every target from all other features.
std::map<std::string, MetricRecord> evaluate_model(const GraphicalModel& m, const Dataset& data,
                                                   const std::vector<std::string>& targets);

/// Simulated population for a scenario: the dataset (continuous + discretized features) and
/// the ground-truth graph.
struct ScenarioData {
  Dataset population;
  DependencyGraph truth;
  SplitResult split;
};
ScenarioData make_scenario_data(const ScenarioConfig& cfg);

struct ExperimentReport {
  nlohmann::ordered_json document;
  std::string markdown;
  std::string metrics_jsonl;
};

ExperimentReport run_experiment(const ScenarioConfig& cfg);

}  // namespace fedngm
