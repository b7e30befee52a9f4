#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedngm/error.hpp"
#include "fedngm/ngr.hpp"
#include "fedngm/sampling.hpp"
#include "fedngm/synth.hpp"
#include "fedngm/train.hpp"
#include "support.hpp"

using namespace fedngm;
using namespace fedngm::testing;

namespace {

ArchSpec hidden(std::size_t w) {
  ArchSpec a;
  a.hidden = {w};
  return a;
}

}  // namespace

TEST_CASE("without penalties NGR training is plain autoencoder training") {
  const auto syn = synth_from_precision(chain_precision(3), 400, 2);
  TrainConfig cfg;
  cfg.lambda_self = 0;
  cfg.gamma_sparsity = 0;
  cfg.epochs = 5;
  const NgrModel m = train_local_ngr(syn.data, hidden(8), cfg);
  const EncodedMatrix x = encode_dataset(syn.data);
  const Mlp init = Mlp::random(hidden(8).for_dim(3), derive_seed(cfg.seed, "init"), cfg.init_scale);
  const TrainResult plain = train(init, x.values, Objective{}, cfg);
  CHECK(m.mlp == plain.model);
  CHECK(ngr_loss(m.mlp, x, cfg).total == doctest::Approx((x.values - forward(m.mlp, x.values)).squaredNorm()));
}

TEST_CASE("chain structure is recovered") {
  const auto syn = synth_from_precision(chain_precision(5), 2000, 31);
  TrainConfig cfg;
  cfg.seed = 4;
  NgrModel m = train_local_ngr(syn.data, hidden(64), cfg);
  const DependencyGraph g = extract_graph(m);
  CHECK(m.extracted_graph == g);
  CHECK(m.extracted_tau == doctest::Approx(default_tau(m.mlp)));
  const EdgeScore e = compare_edges(syn.graph, g);
  INFO("tp " << e.true_positive << " fp " << e.false_positive << " fn " << e.false_negative);
  CHECK(e.f1() >= 0.75);
}

TEST_CASE("independent features yield few spurious edges") {
  const auto syn = synth_from_precision(Eigen::MatrixXd::Identity(5, 5), 2000, 5);
  TrainConfig cfg;
  NgrModel m = train_local_ngr(syn.data, hidden(32), cfg);
  CHECK(extract_graph(m).edge_count() <= 1);
}

TEST_CASE("extracted edge sets are nested in the threshold") {
  const auto syn = synth_ggm(6, 0.4, 800, 7);
  TrainConfig cfg;
  cfg.epochs = 30;
  NgrModel m = train_local_ngr(syn.data, hidden(16), cfg);
  const double top = relative_tau(m.mlp, 1.0);
  DependencyGraph prev = extract_graph(m, 0.0);
  for (double r : {0.01, 0.05, 0.1, 0.3, 0.6, 1.01}) {
    const DependencyGraph g = extract_graph(m, r * top);
    for (const auto& [a, b] : g.edges()) CHECK(prev.has_edge(a, b));
    prev = g;
  }
  CHECK(prev.edge_count() == 0);
  CHECK(default_tau(m.mlp) >= relative_tau(m.mlp));
  CHECK(default_tau(m.mlp) >= kDefaultAbsoluteTau);
}

TEST_CASE("a stronger sparsity penalty shrinks the path matrix") {
  const auto syn = synth_ggm(5, 0.5, 1000, 9);
  TrainConfig cfg;
  cfg.epochs = 40;
  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {0.0, 0.05, 0.5}) {
    cfg.gamma_sparsity = gamma;
    const NgrModel m = train_local_ngr(syn.data, hidden(16), cfg);
    const double mass = symmetrize(path_matrix(m.mlp)).sum();
    INFO("gamma " << gamma << " mass " << mass);
    CHECK(mass < prev);
    prev = mass;
  }
}

TEST_CASE("self-dependency penalty suppresses the diagonal") {
  const auto syn = synth_from_precision(chain_precision(4), 1000, 13);
  TrainConfig cfg;
  cfg.epochs = 60;
  const NgrModel m = train_local_ngr(syn.data, hidden(16), cfg);
  const Mlp init = Mlp::random(hidden(16).for_dim(4), derive_seed(cfg.seed, "init"), cfg.init_scale);
  const auto self_mass = [](const Mlp& n) { return symmetrize(path_matrix(n)).diagonal().sum(); };
  CHECK(self_mass(m.mlp) < 0.05 * self_mass(init));
  Eigen::MatrixXd s = path_matrix(m.mlp);
  const double diag = s.diagonal().maxCoeff();
  s.diagonal().setZero();
  CHECK(diag < 0.05 * s.maxCoeff());
  // Without self paths the reconstruction error cannot fall below the conditional variance.
  const EncodedMatrix x = encode_dataset(syn.data);
  CHECK((x.values - forward(m.mlp, x.values)).squaredNorm() / static_cast<double>(x.values.size()) > 0.5);
}

TEST_CASE("global NGR from pooled samples with proportional weighting") {
  const auto a = synth_from_precision(chain_precision(3), 300, 1);
  const auto b = synth_from_precision(chain_precision(3), 900, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  const NgrModel la = train_local_ngr(a.data, hidden(8), cfg);
  const NgrModel lb = train_local_ngr(b.data, hidden(8), cfg);
  const std::vector<std::size_t> sizes{300, 900};
  const auto counts = sample_counts(Weighting::Proportional, sizes, 200);
  CHECK(counts == std::vector<std::size_t>{200, 600});
  const std::vector<EncodedMatrix> samples{sample(la, counts[0], 1), sample(lb, counts[1], 2)};
  const NgrModel g = train_global_ngr(samples, hidden(8), cfg, Weighting::Proportional);
  CHECK(g.training_rows == 800);
  CHECK(g.schema.names() == la.schema.names());
  CHECK_THROWS_AS(train_global_ngr(samples, hidden(8), cfg, Weighting::Equal), ConfigError);
}

TEST_CASE("NGR training is deterministic") {
  const auto syn = synth_from_precision(chain_precision(3), 300, 3);
  TrainConfig cfg;
  cfg.epochs = 5;
  CHECK(serialize_model(train_local_ngr(syn.data, hidden(8), cfg)) ==
        serialize_model(train_local_ngr(syn.data, hidden(8), cfg)));
}
