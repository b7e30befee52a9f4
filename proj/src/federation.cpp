#include "fedngm/federation.hpp"

#include <algorithm>
#include <future>
#include <set>

#include <json.hpp>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::string payload_bytes(const Payload& p) {
  return std::visit(
      overloaded{
          [](const VariableList& v) { return nlohmann::json{{"variables", v.names}}.dump(); },
          [](const ClientGraph& g) { return graph_to_json(g.graph); },
          [](const GlobalGraph& g) { return graph_to_json(g.graph); },
          [](const ClientModel& m) { return m.model_bytes; },
          [](const GlobalModel& m) { return m.model_bytes; },
      },
      p);
}

}  // namespace

std::string FederationMessage::type_name() const {
  return std::visit(overloaded{
                        [](const VariableList&) { return "VariableList"; },
                        [](const ClientGraph&) { return "ClientGraph"; },
                        [](const GlobalGraph&) { return "GlobalGraph"; },
                        [](const ClientModel&) { return "ClientModel"; },
                        [](const GlobalModel&) { return "GlobalModel"; },
                    },
                    payload);
}

std::string FederationMessage::to_wire() const {
  const std::string body = payload_bytes(payload);
  nlohmann::ordered_json env;
  env["type"] = type_name();
  env["sender"] = sender;
  env["recipient"] = recipient;
  env["round"] = round;
  if (const auto* cm = std::get_if<ClientModel>(&payload)) env["dataset_size"] = cm->dataset_size;
  env["payload_bytes"] = body.size();
  return env.dump() + "\n" + body;
}

FederationMessage FederationMessage::from_wire(std::string_view bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string_view::npos) throw ProtocolError("message has no envelope");
  try {
    const auto env = nlohmann::json::parse(bytes.substr(0, nl));
    const std::string_view body = bytes.substr(nl + 1);
    if (body.size() != env.at("payload_bytes").get<std::size_t>()) throw ProtocolError("payload size mismatch");
    FederationMessage m;
    m.sender = env.at("sender");
    m.recipient = env.at("recipient");
    m.round = env.at("round");
    const std::string type = env.at("type");
    if (type == "VariableList") {
      m.payload = VariableList{nlohmann::json::parse(body).at("variables").get<std::vector<std::string>>()};
    } else if (type == "ClientGraph") {
      m.payload = ClientGraph{graph_from_json(std::string(body))};
    } else if (type == "GlobalGraph") {
      m.payload = GlobalGraph{graph_from_json(std::string(body))};
    } else if (type == "ClientModel" || type == "GlobalModel") {
      deserialize_model(body);  // validates the payload
      if (type == "ClientModel") {
        const auto size = env.at("dataset_size").get<std::size_t>();
        if (size < 1) throw ProtocolError("ClientModel.dataset_size must be >= 1");
        m.payload = ClientModel{std::string(body), size};
      } else {
        m.payload = GlobalModel{std::string(body)};
      }
    } else {
      throw ProtocolError("unknown message type '" + type + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  } catch (const ConfigError& e) {
    throw ProtocolError(std::string("invalid message payload: ") + e.what());
  }
}

FederationMessage Transcript::transmit(const FederationMessage& m) {
  std::string wire = m.to_wire();
  FederationMessage received = FederationMessage::from_wire(wire);
  entries_.push_back({entries_.size(), received, std::move(wire)});
  return received;
}

std::size_t Transcript::count(std::string_view type) const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                [&](const auto& e) { return e.message.type_name() == type; }));
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["sequence"] = e.sequence;
    j["round"] = e.message.round;
    j["type"] = e.message.type_name();
    j["sender"] = e.message.sender;
    j["recipient"] = e.message.recipient;
    j["bytes"] = e.wire.size();
    j["hash"] = content_hash(e.wire);
    out += j.dump() + "\n";
  }
  return out;
}

void FederationConfig::validate() const {
  if (samples_per_client < 1) throw ConfigError("samples_per_client must be >= 1");
  if (min_clients_k < 1) throw ConfigError("min_clients_k must be >= 1");
  if (!(recovery.ridge > 0)) throw ConfigError("recovery ridge must be > 0");
  local_train.validate();
  global_train.validate();
}

GateDecision privacy_gate(std::size_t n_contributing_clients, const FederationConfig& cfg) {
  return n_contributing_clients >= cfg.min_clients_k ? GateDecision::Permit : GateDecision::Deny;
}

// ---------------------------------------------------------------------------------------------
// Client

FederationClient::FederationClient(Dataset data, const FederationConfig& cfg) : data_(std::move(data)), cfg_(cfg) {
  if (data_.name().empty() || data_.name() == kMasterId)
    throw ConfigError("client dataset needs a name other than '" + std::string(kMasterId) + "'");
}

TrainConfig FederationClient::local_train_config() const {
  TrainConfig t = cfg_.local_train;
  t.seed = derive_seed(cfg_.seed, "client/" + id());
  return t;
}

FederationMessage FederationClient::share_graph(std::uint32_t round) const {
  const DependencyGraph g =
      recover_graph_precision(encode_dataset(data_), cfg_.recovery.ridge, cfg_.recovery.threshold);
  return {id(), std::string(kMasterId), round, ClientGraph{g}};
}

void FederationClient::receive_global_graph(const FederationMessage& m) {
  const auto* g = std::get_if<GlobalGraph>(&m.payload);
  if (!g) throw ProtocolError("expected GlobalGraph, got " + m.type_name());
  global_graph_ = g->graph;
}

void FederationClient::train_local_ngm() {
  if (!global_graph_) throw ProtocolError("client '" + id() + "' has no global graph");
  local_ = ::fedngm::train_local_ngm(data_, *global_graph_, cfg_.arch, local_train_config());
}

FederationMessage FederationClient::share_variables(std::uint32_t round) const {
  return {id(), std::string(kMasterId), round, VariableList{data_.schema().names()}};
}

void FederationClient::receive_variable_list(const FederationMessage& m) {
  const auto* v = std::get_if<VariableList>(&m.payload);
  if (!v) throw ProtocolError("expected VariableList, got " + m.type_name());
  global_variables_ = v->names;
}

void FederationClient::train_local_ngr() {
  if (!global_variables_) throw ProtocolError("client '" + id() + "' has no global variable list");
  local_ = ::fedngm::train_local_ngr(data_.select_features(*global_variables_), cfg_.arch, local_train_config());
}

FederationMessage FederationClient::share_model(std::uint32_t round) const {
  if (!local_) throw ProtocolError("client '" + id() + "' has no trained model");
  return {id(), std::string(kMasterId), round, ClientModel{serialize_model(*local_), data_.rows()}};
}

void FederationClient::receive_global_model(const FederationMessage& m) {
  const auto* g = std::get_if<GlobalModel>(&m.payload);
  if (!g) throw ProtocolError("expected GlobalModel, got " + m.type_name());
  global_ = deserialize_model(g->model_bytes);
}

// ---------------------------------------------------------------------------------------------
// Master

void FederationMaster::receive(const FederationMessage& m) {
  if (m.recipient != kMasterId) throw ProtocolError("message for '" + m.recipient + "' delivered to master");
  std::visit(overloaded{
                 [&](const ClientGraph& g) { client_graphs_.insert_or_assign(m.sender, g.graph); },
                 [&](const VariableList& v) { client_variables_.insert_or_assign(m.sender, v.names); },
                 [&](const ClientModel& c) { client_models_.insert_or_assign(m.sender, c); },
                 [&](const auto&) { throw ProtocolError("master cannot accept " + m.type_name()); },
             },
             m.payload);
}

void FederationMaster::gate(std::size_t contributors, std::string_view what) const {
  if (privacy_gate(contributors, cfg_) == GateDecision::Deny)
    throw ProtocolError("privacy gate: " + std::string(what) + " built from " + std::to_string(contributors) +
                        " client(s), release requires at least " + std::to_string(cfg_.min_clients_k));
}

std::vector<FederationMessage> FederationMaster::release_global_graph(std::uint32_t round) {
  if (client_graphs_.empty()) throw ProtocolError("no client graphs received");
  std::vector<DependencyGraph> graphs;
  for (const auto& [id, g] : client_graphs_) graphs.push_back(g);
  graph_ = merge_graphs(graphs);
  gate(client_graphs_.size(), "global graph");
  std::vector<FederationMessage> out;
  for (const auto& [id, g] : client_graphs_) out.push_back({std::string(kMasterId), id, round, GlobalGraph{*graph_}});
  return out;
}

std::vector<FederationMessage> FederationMaster::release_variable_list(std::uint32_t round) {
  if (client_variables_.empty()) throw ProtocolError("no client variable lists received");
  std::set<std::string> common;
  bool first = true;
  for (const auto& [id, names] : client_variables_) {
    std::set<std::string> mine(names.begin(), names.end());
    if (first) {
      common = std::move(mine);
      first = false;
    } else {
      std::set<std::string> next;
      std::set_intersection(common.begin(), common.end(), mine.begin(), mine.end(), std::inserter(next, next.end()));
      common = std::move(next);
    }
  }
  if (common.empty()) throw ProtocolError("no common variables across clients");
  variables_.assign(common.begin(), common.end());
  gate(client_variables_.size(), "global variable list");
  std::vector<FederationMessage> out;
  for (const auto& [id, names] : client_variables_)
    out.push_back({std::string(kMasterId), id, round, VariableList{variables_}});
  return out;
}

AnyModel distill_global(std::span<const ClientContribution> contributions, const std::optional<DependencyGraph>& graph,
                        const FederationConfig& cfg) {
  if (contributions.empty()) throw ProtocolError("no client models received");
  std::vector<std::size_t> sizes;
  for (const auto& c : contributions) sizes.push_back(c.dataset_size);
  const auto counts = sample_counts(cfg.weighting, sizes, cfg.samples_per_client);
  std::vector<EncodedMatrix> samples;
  for (std::size_t c = 0; c < contributions.size(); ++c)
    samples.push_back(sample(base_of(contributions[c].model), counts[c],
                             derive_seed(cfg.seed, "sample/" + contributions[c].id), cfg.sampler));

  TrainConfig t = cfg.global_train;
  t.seed = derive_seed(cfg.seed, "global");
  if (cfg.mode == ModelKind::Ngm) {
    if (!graph) throw ProtocolError("NGM distillation needs the global graph");
    return train_global_ngm(samples, *graph, cfg.arch, t, std::nullopt, cfg.weighting);
  }
  NgrModel g = train_global_ngr(samples, cfg.arch, t, cfg.weighting);
  extract_graph(g);
  return g;
}

void FederationMaster::distill() {
  if (client_models_.empty()) throw ProtocolError("no client models received");
  if (cfg_.mode == ModelKind::Ngm && !graph_) throw ProtocolError("distill called before the global graph was formed");
  std::vector<ClientContribution> contributions;
  for (const auto& [id, cm] : client_models_)
    contributions.push_back({id, deserialize_model(cm.model_bytes), cm.dataset_size});
  global_ = distill_global(contributions, graph_, cfg_);
}

std::vector<FederationMessage> FederationMaster::release_global_model(std::uint32_t round) {
  if (!global_) throw ProtocolError("no global model to release");
  gate(client_models_.size(), "global model");
  const std::string bytes = serialize_model(*global_);
  std::vector<FederationMessage> out;
  for (const auto& [id, cm] : client_models_) out.push_back({std::string(kMasterId), id, round, GlobalModel{bytes}});
  return out;
}

// ---------------------------------------------------------------------------------------------
// Protocol drivers

namespace {

std::vector<FederationClient> make_clients(std::span<const Dataset> data, const FederationConfig& cfg) {
  if (data.empty()) throw ConfigError("federation needs at least one client");
  cfg.validate();
  std::vector<FederationClient> clients;
  for (const auto& d : data) clients.emplace_back(d, cfg);
  std::sort(clients.begin(), clients.end(), [](const auto& a, const auto& b) { return a.id() < b.id(); });
  for (std::size_t i = 1; i < clients.size(); ++i)
    if (clients[i].id() == clients[i - 1].id()) throw ConfigError("duplicate client id '" + clients[i].id() + "'");
  return clients;
}

// Clients train independently; results are joined in id order.
template <typename Fn>
void for_each_client_concurrently(std::vector<FederationClient>& clients, Fn fn) {
  std::vector<std::future<void>> jobs;
  jobs.reserve(clients.size());
  for (auto& c : clients) jobs.push_back(std::async(std::launch::async, [&c, &fn] { fn(c); }));
  for (auto& j : jobs) j.get();
}

void deliver(Transcript& t, const std::vector<FederationMessage>& msgs, std::vector<FederationClient>& clients,
             void (FederationClient::*handler)(const FederationMessage&)) {
  for (const auto& m : msgs) {
    const FederationMessage received = t.transmit(m);
    auto it = std::find_if(clients.begin(), clients.end(), [&](const auto& c) { return c.id() == received.recipient; });
    if (it == clients.end()) throw ProtocolError("no client '" + received.recipient + "'");
    ((*it).*handler)(received);
  }
}

template <typename Model>
std::map<std::string, Model> local_models(const std::vector<FederationClient>& clients) {
  std::map<std::string, Model> out;
  for (const auto& c : clients) out.emplace(c.id(), std::get<Model>(*c.local_model()));
  return out;
}

}  // namespace

NgmFederationResult run_federated_ngm(std::span<const Dataset> data, const FederationConfig& cfg_in) {
  FederationConfig cfg = cfg_in;
  cfg.mode = ModelKind::Ngm;
  auto clients = make_clients(data, cfg);
  FederationMaster master(cfg);
  Transcript t;

  for (const auto& c : clients) master.receive(t.transmit(c.share_graph(1)));
  deliver(t, master.release_global_graph(1), clients, &FederationClient::receive_global_graph);
  for_each_client_concurrently(clients, [](FederationClient& c) { c.train_local_ngm(); });
  for (const auto& c : clients) master.receive(t.transmit(c.share_model(2)));
  master.distill();
  deliver(t, master.release_global_model(2), clients, &FederationClient::receive_global_model);

  return {std::get<NgmModel>(*master.global_model()), *master.global_graph(), local_models<NgmModel>(clients),
          std::move(t)};
}

NgrFederationResult run_federated_ngr(std::span<const Dataset> data, const FederationConfig& cfg_in) {
  FederationConfig cfg = cfg_in;
  cfg.mode = ModelKind::Ngr;
  auto clients = make_clients(data, cfg);
  FederationMaster master(cfg);
  Transcript t;

  for (const auto& c : clients) master.receive(t.transmit(c.share_variables(1)));
  deliver(t, master.release_variable_list(1), clients, &FederationClient::receive_variable_list);
  for_each_client_concurrently(clients, [](FederationClient& c) { c.train_local_ngr(); });
  for (const auto& c : clients) master.receive(t.transmit(c.share_model(2)));
  master.distill();
  deliver(t, master.release_global_model(2), clients, &FederationClient::receive_global_model);

  return {std::get<NgrModel>(*master.global_model()), master.global_variables(), local_models<NgrModel>(clients),
          std::move(t)};
}

}  // namespace fedngm
