#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fedngm/error.hpp"
#include "fedngm/ngm.hpp"
#include "fedngm/sampling.hpp"
#include "fedngm/synth.hpp"
#include "support.hpp"

using namespace fedngm;
using namespace fedngm::testing;

namespace {

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

ArchSpec hidden(std::size_t w) {
  ArchSpec a;
  a.hidden = {w};
  return a;
}

}  // namespace

TEST_CASE("chain NGM regresses each feature nearly as well as the linear oracle") {
  const auto train = synth_from_precision(chain_precision(5), 2000, 11);
  const auto test = synth_from_precision(chain_precision(5), 1000, 12);
  TrainConfig cfg;
  cfg.seed = 1;
  const NgmModel m = train_local_ngm(train.data, train.graph, hidden(64), cfg);
  const auto names = m.schema.names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    const Eigen::VectorXd pred = predict_feature(m, test.data, names[j]).col(0);
    const double model = rmse(pred, test.data.cells().col(static_cast<Eigen::Index>(j)));
    const double oracle = linear_oracle_rmse(train.data.cells(), test.data.cells(), static_cast<Eigen::Index>(j));
    INFO(names[j] << " model " << model << " oracle " << oracle);
    CHECK(model <= 1.15 * oracle);
  }
}

TEST_CASE("structure penalty drives off-graph path mass toward zero") {
  const auto syn = synth_from_precision(chain_precision(4), 1000, 3);
  const auto empty = DependencyGraph::empty(syn.graph.nodes());
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lambda = 0.0;
  const NgmModel control = train_local_ngm(syn.data, empty, hidden(16), cfg);
  cfg.lambda = 5.0;
  const NgmModel penalized = train_local_ngm(syn.data, empty, hidden(16), cfg);
  auto off_graph = [](const NgmModel& m) { return path_matrix(m.mlp).cwiseProduct(m.mask_complement.values).sum(); };
  INFO("control " << off_graph(control) << " penalized " << off_graph(penalized));
  CHECK(off_graph(penalized) < 0.01 * off_graph(control));
}

TEST_CASE("a near-deterministic pair is recovered through the graph") {
  Rng rng(4);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(2000, 2);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = n(rng);
    x(i, 1) = x(i, 0) + 0.1 * n(rng);
  }
  const Dataset d = continuous_dataset("pair", x);
  const auto g = DependencyGraph::complete(d.schema().names());
  TrainConfig cfg;
  cfg.seed = 2;
  const NgmModel m = train_local_ngm(d, g, hidden(32), cfg);
  const Dataset test = continuous_dataset("pair_test", x.topRows(500));
  CHECK(rmse(predict_feature(m, test, "x1").col(0), x.topRows(500).col(1)) < 0.15);
}

TEST_CASE("NGM training is deterministic for a fixed seed") {
  const auto syn = synth_from_precision(chain_precision(3), 400, 8);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 5;
  const std::string a = serialize_model(train_local_ngm(syn.data, syn.graph, hidden(8), cfg));
  CHECK(a == serialize_model(train_local_ngm(syn.data, syn.graph, hidden(8), cfg)));
  cfg.seed = 6;
  CHECK(a != serialize_model(train_local_ngm(syn.data, syn.graph, hidden(8), cfg)));
}

TEST_CASE("local training restricts the data to the graph's nodes") {
  const auto syn = synth_from_precision(chain_precision(4), 300, 1);
  const std::vector<std::string> keep{"x1", "x2"};
  const auto g = syn.graph.restrict_to(keep);
  TrainConfig cfg;
  cfg.epochs = 2;
  const NgmModel m = train_local_ngm(syn.data, g, hidden(4), cfg);
  CHECK(m.schema.names() == keep);
  CHECK(m.mlp.input_dim() == 2);
  CHECK(m.training_rows == 300);
}

TEST_CASE("distilling a model from its own samples preserves its regressions") {
  const auto train = synth_from_precision(chain_precision(4), 2000, 21);
  const auto test = synth_from_precision(chain_precision(4), 1000, 22);
  TrainConfig cfg;
  const NgmModel local = train_local_ngm(train.data, train.graph, hidden(32), cfg);
  const std::vector<EncodedMatrix> samples{sample(local, 2000, 9)};
  cfg.seed = 3;
  const NgmModel global = train_global_ngm(samples, train.graph, hidden(32), cfg);
  CHECK(global.graph == train.graph);
  for (const auto& f : global.schema.names()) {
    const Eigen::Index j = static_cast<Eigen::Index>(test.data.schema().index_of(f));
    const double l = rmse(predict_feature(local, test.data, f).col(0), test.data.cells().col(j));
    const double g = rmse(predict_feature(global, test.data, f).col(0), test.data.cells().col(j));
    INFO(f << " local " << l << " global " << g);
    CHECK(g < 1.2 * l);
  }
}

TEST_CASE("per-client sample counts") {
  const std::vector<std::size_t> sizes{100, 300, 150};
  CHECK(sample_counts(Weighting::Equal, sizes, 500) == std::vector<std::size_t>{500, 500, 500});
  CHECK(sample_counts(Weighting::Proportional, sizes, 100) == std::vector<std::size_t>{100, 300, 150});
  const std::vector<std::size_t> odd{3, 4};
  CHECK(sample_counts(Weighting::Proportional, odd, 10) == std::vector<std::size_t>{10, 13});
  CHECK(weighting_from_string(to_string(Weighting::Proportional)) == Weighting::Proportional);
  CHECK_THROWS_AS(weighting_from_string("weird"), ConfigError);
}

TEST_CASE("equal weighting rejects unbalanced sample sets") {
  const auto syn = synth_from_precision(chain_precision(2), 300, 1);
  TrainConfig cfg;
  cfg.epochs = 1;
  const NgmModel local = train_local_ngm(syn.data, syn.graph, hidden(4), cfg);
  const std::vector<EncodedMatrix> unbalanced{sample(local, 100, 1), sample(local, 200, 2)};
  CHECK_THROWS_AS(train_global_ngm(unbalanced, syn.graph, hidden(4), cfg), ConfigError);
  CHECK_NOTHROW(train_global_ngm(unbalanced, syn.graph, hidden(4), cfg, std::nullopt, Weighting::Proportional));
}
