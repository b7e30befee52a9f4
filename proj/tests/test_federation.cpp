#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "fedngm/error.hpp"
#include "fedngm/federation.hpp"
#include "fedngm/synth.hpp"
#include "support.hpp"

using namespace fedngm;
using namespace fedngm::testing;

namespace {

FederationConfig quick_config(ModelKind mode) {
  FederationConfig c;
  c.mode = mode;
  c.samples_per_client = 300;
  c.arch.hidden = {8};
  c.local_train.epochs = 5;
  c.global_train.epochs = 5;
  c.seed = 11;
  return c;
}

std::vector<Dataset> chain_clients(std::size_t n, std::size_t rows, std::uint64_t seed) {
  std::vector<Dataset> out;
  for (std::size_t c = 0; c < n; ++c)
    out.push_back(synth_from_precision(chain_precision(4), rows, seed + c).data.renamed("client" + std::to_string(c)));
  return out;
}

// Appends a client-only column holding value + row / 1000.
Dataset with_extra_column(const Dataset& d, const std::string& name, double value) {
  std::vector<Feature> f = d.schema().features();
  f.push_back(Feature::continuous(name));
  Eigen::MatrixXd cells(d.cells().rows(), d.cells().cols() + 1);
  cells << d.cells(), Eigen::VectorXd::LinSpaced(d.cells().rows(), value, value + 0.001 * (d.cells().rows() - 1));
  return Dataset(d.name(), FeatureSchema(f), cells);
}

bool contains_bytes(const std::string& hay, double v) {
  char b[sizeof(double)];
  std::memcpy(b, &v, sizeof b);
  return hay.find(std::string(b, sizeof b)) != std::string::npos;
}

}  // namespace

TEST_CASE("privacy gate thresholds") {
  FederationConfig c;
  c.min_clients_k = 3;
  CHECK(privacy_gate(2, c) == GateDecision::Deny);
  CHECK(privacy_gate(3, c) == GateDecision::Permit);
  c.min_clients_k = 1;
  for (std::size_t n : {1u, 2u, 50u}) CHECK(privacy_gate(n, c) == GateDecision::Permit);
  c.min_clients_k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("NGM protocol message counts") {
  const auto clients = chain_clients(3, 400, 1);
  const NgmFederationResult r = run_federated_ngm(clients, quick_config(ModelKind::Ngm));
  CHECK(r.transcript.count("ClientGraph") == 3);
  CHECK(r.transcript.count("GlobalGraph") == 3);
  CHECK(r.transcript.count("ClientModel") == 3);
  CHECK(r.transcript.count("GlobalModel") == 3);
  CHECK(r.transcript.count("VariableList") == 0);
  CHECK(r.transcript.entries().size() == 12);
  CHECK(r.local_models.size() == 3);
  CHECK(r.global.graph == r.global_graph);
}

TEST_CASE("NGR protocol exchanges variable lists and intersects them") {
  const auto base = synth_from_precision(chain_precision(4), 400, 2).data;
  const std::vector<std::string> abc{"x0", "x1", "x2"}, bcd{"x1", "x2", "x3"};
  const std::vector<Dataset> clients{base.select_features(abc).renamed("a"), base.select_features(bcd).renamed("b")};
  const NgrFederationResult r = run_federated_ngr(clients, quick_config(ModelKind::Ngr));
  CHECK(r.global_variables == std::vector<std::string>{"x1", "x2"});
  CHECK(r.global.schema.names() == r.global_variables);
  CHECK(r.transcript.count("VariableList") == 4);
  CHECK(r.transcript.count("ClientModel") == 2);
  CHECK(r.transcript.count("GlobalModel") == 2);
  CHECK(r.transcript.count("ClientGraph") == 0);
  CHECK(r.transcript.count("GlobalGraph") == 0);
}

TEST_CASE("disjoint variables are a protocol error") {
  const auto base = synth_from_precision(chain_precision(4), 200, 2).data;
  const std::vector<std::string> ab{"x0", "x1"}, cd{"x2", "x3"};
  const std::vector<Dataset> clients{base.select_features(ab).renamed("a"), base.select_features(cd).renamed("b")};
  CHECK_THROWS_AS(run_federated_ngr(clients, quick_config(ModelKind::Ngr)), ProtocolError);
  CHECK_THROWS_AS(run_federated_ngm(clients, quick_config(ModelKind::Ngm)), ProtocolError);
}

TEST_CASE("gate blocks release below k contributors") {
  const auto clients = chain_clients(2, 200, 3);
  auto cfg = quick_config(ModelKind::Ngm);
  cfg.min_clients_k = 3;
  CHECK_THROWS_AS(run_federated_ngm(clients, cfg), ProtocolError);
  cfg.mode = ModelKind::Ngr;
  CHECK_THROWS_AS(run_federated_ngr(clients, cfg), ProtocolError);
  cfg.min_clients_k = 2;
  CHECK_NOTHROW(run_federated_ngr(clients, cfg));
}

TEST_CASE("protocol is deterministic and independent of client order") {
  const auto clients = chain_clients(3, 300, 4);
  for (auto mode : {ModelKind::Ngm, ModelKind::Ngr})
    for (auto w : {Weighting::Equal, Weighting::Proportional}) {
      auto cfg = quick_config(mode);
      cfg.weighting = w;
      const std::vector<Dataset> reversed(clients.rbegin(), clients.rend());
      if (mode == ModelKind::Ngm) {
        const auto a = run_federated_ngm(clients, cfg);
        const auto b = run_federated_ngm(clients, cfg);
        const auto c = run_federated_ngm(reversed, cfg);
        CHECK(serialize_model(a.global) == serialize_model(b.global));
        CHECK(a.transcript.to_jsonl() == b.transcript.to_jsonl());
        CHECK(serialize_model(a.global) == serialize_model(c.global));
        CHECK(a.transcript.to_jsonl() == c.transcript.to_jsonl());
      } else {
        const auto a = run_federated_ngr(clients, cfg);
        const auto b = run_federated_ngr(clients, cfg);
        const auto c = run_federated_ngr(reversed, cfg);
        CHECK(serialize_model(a.global) == serialize_model(b.global));
        CHECK(a.transcript.to_jsonl() == b.transcript.to_jsonl());
        CHECK(serialize_model(a.global) == serialize_model(c.global));
      }
    }
}

TEST_CASE("no client value crosses the wire") {
  const double sentinel = 8675309.4242;
  auto clients = chain_clients(3, 300, 5);
  clients[1] = with_extra_column(clients[1], "private_extra", sentinel);
  for (auto mode : {ModelKind::Ngm, ModelKind::Ngr}) {
    const auto cfg = quick_config(mode);
    const Transcript t = mode == ModelKind::Ngm ? run_federated_ngm(clients, cfg).transcript
                                                : run_federated_ngr(clients, cfg).transcript;
    for (const auto& e : t.entries()) {
      CHECK(e.wire.find("8675309") == std::string::npos);
      for (Eigen::Index i = 0; i < clients[1].cells().rows(); ++i)
        CHECK_FALSE(contains_bytes(e.wire, clients[1].cells()(i, 4)));
      for (const auto& d : clients)
        for (Eigen::Index i = 0; i < 20; ++i) CHECK_FALSE(contains_bytes(e.wire, d.cells()(i, 0)));
    }
  }
}

TEST_CASE("proportional sample counts follow dataset sizes") {
  const std::vector<std::size_t> sizes{1000, 3000};
  CHECK(sample_counts(Weighting::Proportional, sizes, 100) == std::vector<std::size_t>{100, 300});
  std::vector<Dataset> clients{synth_from_precision(chain_precision(3), 1000, 1).data.renamed("a"),
                               synth_from_precision(chain_precision(3), 3000, 2).data.renamed("b")};
  auto cfg = quick_config(ModelKind::Ngr);
  cfg.weighting = Weighting::Proportional;
  cfg.samples_per_client = 100;
  CHECK(run_federated_ngr(clients, cfg).global.training_rows == 400);
}

TEST_CASE("single-client federation matches self-distillation") {
  const auto train = synth_from_precision(chain_precision(4), 2000, 7);
  const auto test = synth_from_precision(chain_precision(4), 500, 8);
  FederationConfig cfg;
  cfg.arch.hidden = {32};
  cfg.samples_per_client = 2000;
  const std::vector<Dataset> one{train.data.renamed("solo")};
  const NgmFederationResult r = run_federated_ngm(one, cfg);
  const NgmModel& local = r.local_models.at("solo");
  for (const auto& f : r.global.schema.names()) {
    const Eigen::Index j = static_cast<Eigen::Index>(test.data.schema().index_of(f));
    const auto err = [&](const NgmModel& m) {
      const Eigen::VectorXd d = predict_feature(m, test.data, f).col(0) - test.data.cells().col(j);
      return std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
    };
    INFO(f << " local " << err(local) << " global " << err(r.global));
    CHECK(err(r.global) <= 1.1 * err(local));
  }
}

TEST_CASE("wire messages round-trip and reject corruption") {
  const auto g = DependencyGraph::from_edges({"a", "b"}, std::vector<std::pair<std::string, std::string>>{{"a", "b"}});
  const FederationMessage m{"c1", std::string(kMasterId), 1, ClientGraph{g}};
  const std::string wire = m.to_wire();
  const FederationMessage back = FederationMessage::from_wire(wire);
  CHECK(back.sender == "c1");
  CHECK(std::get<ClientGraph>(back.payload).graph == g);
  CHECK(back.to_wire() == wire);
  CHECK_THROWS_AS(FederationMessage::from_wire("garbage"), ProtocolError);
  CHECK_THROWS_AS(FederationMessage::from_wire(wire.substr(0, wire.size() - 2)), ProtocolError);
  const FederationMessage bad{"c1", std::string(kMasterId), 2, ClientModel{"x", 0}};
  CHECK_THROWS_AS(FederationMessage::from_wire(bad.to_wire()), ProtocolError);
}

TEST_CASE("master rejects out-of-protocol messages") {
  FederationMaster master(quick_config(ModelKind::Ngm));
  const auto g = DependencyGraph::empty({"a"});
  CHECK_THROWS_AS(master.receive({std::string(kMasterId), "c1", 1, GlobalGraph{g}}), ProtocolError);
  CHECK_THROWS_AS(master.receive({"c1", "c2", 1, ClientGraph{g}}), ProtocolError);
  CHECK_THROWS_AS(master.release_global_graph(1), ProtocolError);
  CHECK_THROWS_AS(master.distill(), ProtocolError);
}
