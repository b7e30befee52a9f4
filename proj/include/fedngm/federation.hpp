#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedngm/graph.hpp"
#include "fedngm/model.hpp"
#include "fedngm/ngm.hpp"
#include "fedngm/ngr.hpp"
#include "fedngm/sampling.hpp"

namespace fedngm {

inline constexpr std::string_view kMasterId = "master";

// Message payloads. None of them can hold a Dataset or raw rows.
struct VariableList {
  std::vector<std::string> names;
};
struct ClientGraph {
  DependencyGraph graph;
};
struct GlobalGraph {
  DependencyGraph graph;
};
struct ClientModel {
  std::string model_bytes;  // serialize_model output
  std::size_t dataset_size = 0;
};
struct GlobalModel {
  std::string model_bytes;
};
using Payload = std::variant<VariableList, ClientGraph, GlobalGraph, ClientModel, GlobalModel>;

struct FederationMessage {
  std::string sender;
  std::string recipient;
  std::uint32_t round = 0;
  Payload payload;

  std::string type_name() const;
  /// Envelope line (JSON) + '\n' + payload bytes; exactly what would cross the network.
  std::string to_wire() const;
  /// Parses and validates a wire message (payload invariants included). Throws ProtocolError.
  static FederationMessage from_wire(std::string_view bytes);
};

struct TranscriptEntry {
  std::size_t sequence = 0;
  FederationMessage message;
  std::string wire;  // bytes as transmitted
};

/// Ordered record of every message of a run.
class Transcript {
 public:
  /// Encodes, records and decodes `m`; the receiver only ever sees the decoded copy.
  FederationMessage transmit(const FederationMessage& m);
  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t count(std::string_view type) const;
  /// One JSON object per line: sequence, round, type, sender, recipient, bytes, hash.
  std::string to_jsonl() const;

 private:
  std::vector<TranscriptEntry> entries_;
};

struct RecoveryConfig {
  double ridge = 1e-2;
  double threshold = 0.1;
};

struct FederationConfig {
  ModelKind mode = ModelKind::Ngm;
  Weighting weighting = Weighting::Equal;
  std::size_t samples_per_client = 5000;
  std::size_t min_clients_k = 1;
  ArchSpec arch;
  TrainConfig local_train;
  TrainConfig global_train;
  RecoveryConfig recovery;
  SamplerConfig sampler;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

enum class GateDecision { Permit, Deny };

/// Global artifacts are released only when at least min_clients_k clients contributed.
GateDecision privacy_gate(std::size_t n_contributing_clients, const FederationConfig& cfg);

/// A trained client model as seen by the master.
struct ClientContribution {
  std::string id;
  AnyModel model;
  std::size_t dataset_size = 0;
};

/// Samples every contribution (seed derived from cfg.seed and the client id) and trains the
/// global model on the pooled samples. NGM mode needs the merged graph; NGR mode extracts
/// the global graph after training. Does not apply the privacy gate.
AnyModel distill_global(std::span<const ClientContribution> contributions, const std::optional<DependencyGraph>& graph,
                        const FederationConfig& cfg);

/// Client-side protocol participant. Owns its data; everything it emits is a message.
class FederationClient {
 public:
  FederationClient(Dataset data, const FederationConfig& cfg);

  const std::string& id() const { return data_.name(); }
  std::size_t dataset_size() const { return data_.rows(); }

  // NGM
  FederationMessage share_graph(std::uint32_t round) const;
  void receive_global_graph(const FederationMessage& m);
  void train_local_ngm();
  // NGR
  FederationMessage share_variables(std::uint32_t round) const;
  void receive_variable_list(const FederationMessage& m);
  void train_local_ngr();

  FederationMessage share_model(std::uint32_t round) const;
  void receive_global_model(const FederationMessage& m);

  const std::optional<AnyModel>& local_model() const { return local_; }
  const std::optional<AnyModel>& global_model() const { return global_; }
  const Dataset& private_data() const { return data_; }

 private:
  TrainConfig local_train_config() const;

  Dataset data_;
  FederationConfig cfg_;
  std::optional<DependencyGraph> global_graph_;
  std::optional<std::vector<std::string>> global_variables_;
  std::optional<AnyModel> local_;
  std::optional<AnyModel> global_;
};

/// Master-side coordinator. Its interface only accepts messages.
class FederationMaster {
 public:
  explicit FederationMaster(const FederationConfig& cfg) : cfg_(cfg) {}

  void receive(const FederationMessage& m);

  /// Merges client graphs (NGM) and returns one GlobalGraph message per client.
  std::vector<FederationMessage> release_global_graph(std::uint32_t round);
  /// Intersects client variable lists (NGR) and returns one VariableList per client.
  std::vector<FederationMessage> release_variable_list(std::uint32_t round);
  /// Samples every client model and trains the global model.
  void distill();
  std::vector<FederationMessage> release_global_model(std::uint32_t round);

  const std::optional<DependencyGraph>& global_graph() const { return graph_; }
  const std::vector<std::string>& global_variables() const { return variables_; }
  const std::optional<AnyModel>& global_model() const { return global_; }

 private:
  void gate(std::size_t contributors, std::string_view what) const;

  FederationConfig cfg_;
  std::map<std::string, DependencyGraph> client_graphs_;
  std::map<std::string, std::vector<std::string>> client_variables_;
  std::map<std::string, ClientModel> client_models_;
  std::optional<DependencyGraph> graph_;
  std::vector<std::string> variables_;
  std::optional<AnyModel> global_;
};

struct NgmFederationResult {
  NgmModel global;
  DependencyGraph global_graph;
  std::map<std::string, NgmModel> local_models;
  Transcript transcript;
};

struct NgrFederationResult {
  NgrModel global;
  std::vector<std::string> global_variables;
  std::map<std::string, NgrModel> local_models;
  Transcript transcript;
};

/// Single-round protocol: client graphs -> merge -> global graph -> local NGMs -> distilled
/// global NGM -> release. Clients are processed in id (dataset name) order, so the result
/// does not depend on the order of `clients`.
NgmFederationResult run_federated_ngm(std::span<const Dataset> clients, const FederationConfig& cfg);

/// As run_federated_ngm with variable lists in place of graphs and NGRs in place of NGMs.
NgrFederationResult run_federated_ngr(std::span<const Dataset> clients, const FederationConfig& cfg);

}  // namespace fedngm
