#pragma once

#include <optional>
#include <span>

#include "fedngm/model.hpp"
#include "fedngm/ngm.hpp"

namespace fedngm {

/// Relative extraction threshold: tau = kDefaultRelativeTau * max(sym(S_nn)).
inline constexpr double kDefaultRelativeTau = 0.05;
/// Floor on the default threshold in normalized units, so a model that learned no dependencies
/// yields an empty graph instead of thresholding noise.
inline constexpr double kDefaultAbsoluteTau = 0.05;

/// Joint structure and regression learning from a dense start; no input graph.
NgrModel train_local_ngr(const Dataset& d, const ArchSpec& arch, const TrainConfig& cfg);

/// Same objective on the pooled client samples (no structure prior from client graphs).
NgrModel train_global_ngr(std::span<const EncodedMatrix> client_samples, const ArchSpec& arch,
                          const TrainConfig& cfg, Weighting weighting = Weighting::Equal);

/// Thresholds the model's path matrix. With no tau, default_tau is used. The result is
/// cached on the model.
DependencyGraph extract_graph(NgrModel& m, std::optional<double> tau = std::nullopt);

/// max(relative_tau(m), kDefaultAbsoluteTau).
double default_tau(const Mlp& m);

/// Absolute threshold corresponding to `relative` for this model.
double relative_tau(const Mlp& m, double relative = kDefaultRelativeTau);

}  // namespace fedngm
