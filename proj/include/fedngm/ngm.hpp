#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedngm/graph.hpp"
#include "fedngm/model.hpp"
#include "fedngm/objective.hpp"
#include "fedngm/schema.hpp"

namespace fedngm {

/// How the master splits its sample budget across client models.
enum class Weighting { Equal, Proportional };

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

/// Equal: every client gets `base`. Proportional: base * M_c / min(M), rounded.
std::vector<std::size_t> sample_counts(Weighting w, std::span<const std::size_t> dataset_sizes, std::size_t base);

/// Trains a client NGM under the structure of `g`. The dataset is first restricted to the
/// graph's nodes (in graph order). Missing edges, including self-dependence, are penalized.
NgmModel train_local_ngm(const Dataset& d, const DependencyGraph& g, const ArchSpec& arch, const TrainConfig& cfg);

/// Distills the global NGM from client samples, which are pooled in the schema spanned by
/// `g`'s nodes. Public rows, when given, join the pool as an extra regression term of weight 1.
/// With Weighting::Equal the per-client counts must agree within 10%.
NgmModel train_global_ngm(std::span<const EncodedMatrix> client_samples, const DependencyGraph& g,
                          const ArchSpec& arch, const TrainConfig& cfg,
                          const std::optional<Dataset>& public_data = std::nullopt,
                          Weighting weighting = Weighting::Equal);

}  // namespace fedngm
