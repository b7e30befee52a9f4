#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Dense>

#include "fedngm/graph.hpp"
#include "fedngm/mlp.hpp"
#include "fedngm/objective.hpp"
#include "fedngm/schema.hpp"

namespace fedngm {

/// State shared by trained NGM and NGR models: the network, the encoding it was trained in,
/// and the training statistics the sampler and inference need.
struct GraphicalModel {
  ModelKind kind = ModelKind::Ngm;
  Mlp mlp;
  FeatureSchema schema;
  ColumnStats stats;
  Eigen::VectorXd unit_mean;     // per-unit mean of the encoded training data
  Eigen::VectorXd residual_std;  // per-unit RMS of x - f(x) on the training data
  std::string provenance;        // content hash of the model this one was derived from, if any
  std::size_t training_rows = 0;

  bool trained() const { return residual_std.size() == static_cast<Eigen::Index>(schema.encoded_dim()); }
};

struct NgmModel : GraphicalModel {
  DependencyGraph graph;
  UnitMask mask_complement;
};

struct NgrModel : GraphicalModel {
  std::optional<DependencyGraph> extracted_graph;
  double extracted_tau = 0.0;
};

using AnyModel = std::variant<NgmModel, NgrModel>;

const GraphicalModel& base_of(const AnyModel& m);

/// Fills unit_mean, residual_std and training_rows from the training matrix.
void record_training_stats(GraphicalModel& m, const Eigen::MatrixXd& x);

/// Binary model document:
///   "FEDNGMv1" magic | u32 format version | u64 header length | JSON header |
///   float64 little-endian payload (per layer: weights row-major, then biases;
///   then stats mean, stats std, unit_mean, residual_std).
/// Round-trips bitwise.
std::string serialize_model(const NgmModel& m);
std::string serialize_model(const NgrModel& m);
std::string serialize_model(const AnyModel& m);
AnyModel deserialize_model(std::string_view bytes);

/// 16 hex digits of FNV-1a over the serialized bytes.
std::string content_hash(std::string_view bytes);

void save_model(const AnyModel& m, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fedngm
