#pragma once

#include <cstdint>
#include <optional>

#include "fedngm/graph.hpp"
#include "fedngm/model.hpp"
#include "fedngm/train.hpp"

namespace fedngm {

enum class NewWeightInit { Zero, Standard };

struct StitchOptions {
  /// Extra units per hidden layer; unset means ceil(0.1 * width of that layer).
  std::optional<std::size_t> extra_hidden_per_layer;
  NewWeightInit init = NewWeightInit::Standard;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Global model grown with client-specific units. Original parameters occupy the leading
/// rows/columns of every layer and are flagged in `frozen`.
struct StitchedModel {
  ModelKind kind = ModelKind::Ngm;
  Mlp mlp;
  ParamMask frozen;
  FeatureSchema schema;  // global features, then client-specific ones
  DependencyGraph graph;  // global graph plus client edges touching the new features
  UnitMask mask_complement;
  ColumnStats global_stats;  // stats of the global model (leading units)
  std::size_t global_dim = 0;
  std::string global_hash;  // content hash of the global model
};

/// Augments `global` with the features of `client_schema` that it lacks. Every weight outside
/// the original blocks is new and trainable. `client_graph`, when given, supplies the edges
/// between new features and the rest; otherwise new features are left unconstrained.
/// Throws SchemaError if the client schema misses a global feature.
StitchedModel stitch_architecture(const AnyModel& global, const FeatureSchema& client_schema,
                                  const std::optional<DependencyGraph>& client_graph, const StitchOptions& opts = {});

/// Trains only the new parameters on the client's data: the local NGM objective with the
/// augmented structure (NGM), or the NGR objective whose gradient reaches only new weights
/// (NGR). Continuous global features are normalized with the global statistics, new ones with
/// statistics from `client_data`.
AnyModel train_personalized(const StitchedModel& stitched, const Dataset& client_data, const TrainConfig& cfg);

/// Encodes client data in the stitched model's space (as train_personalized does).
EncodedMatrix encode_for_stitched(const StitchedModel& stitched, const Dataset& client_data);

}  // namespace fedngm
