#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "fedngm/error.hpp"
#include "fedngm/model.hpp"
#include "fedngm/ngm.hpp"
#include "fedngm/ngr.hpp"
#include "fedngm/synth.hpp"
#include "fedngm/train.hpp"
#include "support.hpp"

using namespace fedngm;
using namespace fedngm::testing;

namespace {

Mlp two_by_two(double a, double b, double c, double d) {
  Mlp m = Mlp::zeros(MlpArchitecture{{2, 2}, Activation::Identity});
  m.weights[0] << a, b, c, d;
  return m;
}

EncodedMatrix random_encoded(std::size_t rows, const FeatureSchema& s, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(s.encoded_dim()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
  return {v, s, ColumnStats::identity(s.encoded_dim())};
}

FeatureSchema continuous_schema(std::size_t d) {
  std::vector<Feature> f;
  for (std::size_t i = 0; i < d; ++i) f.push_back(Feature::continuous("f" + std::to_string(i)));
  return FeatureSchema(f);
}

}  // namespace

TEST_CASE("zero network outputs zero") {
  const Mlp m = Mlp::zeros(MlpArchitecture::symmetric(4, {3}));
  CHECK(forward(m, Eigen::MatrixXd(Eigen::MatrixXd::Random(5, 4))).isZero());
}

TEST_CASE("single identity layer is the identity map") {
  Mlp m = Mlp::zeros(MlpArchitecture{{3, 3}, Activation::Relu});
  m.weights[0].setIdentity();
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  CHECK(forward(m, x) == x);
}

TEST_CASE("batch forward equals stacked row-wise forward") {
  for (auto act : {Activation::Relu, Activation::Tanh}) {
    const Mlp m = Mlp::random(MlpArchitecture::symmetric(5, {7, 4}, act), 3);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(9, 5);
    const Eigen::MatrixXd batch = forward(m, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Eigen::VectorXd row = forward(m, Eigen::VectorXd(x.row(r).transpose()));
      CHECK((batch.row(r).transpose() - row).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("forward rejects a width mismatch") {
  const Mlp m = Mlp::random(MlpArchitecture::symmetric(3, {2}), 1);
  CHECK_THROWS_AS(forward(m, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 4))), ConfigError);
}

TEST_CASE("path matrix of a two-layer example") {
  Mlp m = Mlp::zeros(MlpArchitecture{{2, 2, 2}, Activation::Relu});
  m.weights[0] << 1, 0, 0, 2;
  m.weights[1] << 0, 3, 1, 0;
  Eigen::MatrixXd expected(2, 2);
  expected << 0, 3, 2, 0;
  CHECK(path_matrix(m) == expected);
}

TEST_CASE("a zero layer annihilates the path matrix") {
  Mlp m = Mlp::random(MlpArchitecture::symmetric(4, {5, 3}), 8);
  m.weights[1].setZero();
  CHECK(path_matrix(m).isZero());
}

TEST_CASE("path matrix support equals brute-force reachability") {
  Rng rng(17);
  std::bernoulli_distribution keep(0.35);
  for (int rep = 0; rep < 30; ++rep) {
    Mlp m = Mlp::random(MlpArchitecture::symmetric(3, {4}), static_cast<std::uint64_t>(rep));
    for (auto& w : m.weights)
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (!keep(rng)) w.data()[i] = 0.0;
    const Eigen::MatrixXd s = path_matrix(m);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t o = 0; o < 3; ++o)
        CHECK((s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)) > 0) == path_exists(m, i, o));
  }
}

TEST_CASE("NGM structure penalty arithmetic") {
  const Mlp m = two_by_two(1, 2, 3, 4);
  UnitMask c{Eigen::MatrixXd::Zero(2, 2)};
  c.values(1, 1) = 1;
  const EncodedMatrix x = random_encoded(3, continuous_schema(2), 1);
  TrainConfig cfg;
  cfg.lambda = 1;
  cfg.log_epsilon = 1e-300;
  CHECK(ngm_loss(m, x, c, cfg).term("structure") == doctest::Approx(std::log(4.0)));
}

TEST_CASE("perfect autoencoder inside the mask pays only the epsilon floor") {
  Mlp m = Mlp::zeros(MlpArchitecture{{3, 3}, Activation::Identity});
  m.weights[0].setIdentity();
  const EncodedMatrix x = random_encoded(10, continuous_schema(3), 2);
  const auto g = DependencyGraph::empty({"f0", "f1", "f2"});
  const UnitMask c = complement_mask(g, x.schema, true);
  TrainConfig cfg;
  cfg.lambda = 2.0;
  const LossBreakdown l = ngm_loss(m, x, c, cfg);
  CHECK(l.reconstruction == 0.0);
  CHECK(l.total == doctest::Approx(2.0 * std::log(cfg.log_epsilon)));
}

TEST_CASE("lambda zero leaves the summed squared error") {
  const Mlp m = Mlp::random(MlpArchitecture::symmetric(3, {4}), 5);
  const EncodedMatrix x = random_encoded(20, continuous_schema(3), 3);
  TrainConfig cfg;
  cfg.lambda = 0;
  const UnitMask c = complement_mask(DependencyGraph::empty({"f0", "f1", "f2"}), x.schema, false);
  const double sse = (x.values - forward(m, x.values)).squaredNorm();
  CHECK(ngm_loss(m, x, c, cfg).total == doctest::Approx(sse).epsilon(1e-14));
}

TEST_CASE("NGR penalty arithmetic") {
  const FeatureSchema s = continuous_schema(3);
  Mlp m = Mlp::zeros(MlpArchitecture{{3, 3}, Activation::Identity});
  m.weights[0].setIdentity();
  TrainConfig cfg;
  cfg.lambda_self = 0.7;
  cfg.gamma_sparsity = 0.2;
  const EncodedMatrix x = random_encoded(4, s, 1);
  const LossBreakdown l = ngr_loss(m, x, cfg);
  CHECK(l.term("self_dependency") == doctest::Approx(3 * 0.7));
  cfg.gamma_sparsity = 0.4;
  CHECK(ngr_loss(m, x, cfg).term("sparsity") == doctest::Approx(2 * l.term("sparsity")));

  const Mlp zero = Mlp::zeros(MlpArchitecture::symmetric(3, {2}));
  const EncodedMatrix zx{Eigen::MatrixXd::Zero(5, 3), s, ColumnStats::identity(3)};
  CHECK(ngr_loss(zero, zx, cfg).total == 0.0);
}

TEST_CASE("loss total equals the sum of its terms") {
  const FeatureSchema s({Feature::continuous("a"), Feature::categorical("b", {"0", "1", "2"})});
  const Mlp m = Mlp::random(MlpArchitecture::symmetric(4, {5}), 9);
  const EncodedMatrix x = random_encoded(7, s, 4);
  TrainConfig cfg;
  cfg.gamma_sparsity = 0.3;
  for (const LossBreakdown& l : {ngr_loss(m, x, cfg),
                                 ngm_loss(m, x, complement_mask(DependencyGraph::empty({"a", "b"}), s, false), cfg)}) {
    double sum = l.reconstruction;
    for (const auto& [n, v] : l.terms) sum += v;
    CHECK(std::abs(sum - l.total) < 1e-10);
  }
}

TEST_CASE("analytic gradients agree with finite differences") {
  const FeatureSchema s = continuous_schema(6);
  const EncodedMatrix x = random_encoded(8, s, 12);
  const auto g = DependencyGraph::from_edges(s.names(), std::vector<std::pair<std::string, std::string>>{{"f0", "f1"}, {"f2", "f3"}});
  const UnitMask c = complement_mask(g, s, false);
  TrainConfig cfg;
  cfg.lambda = 0.8;
  cfg.gamma_sparsity = 0.3;
  for (auto act : {Activation::Tanh, Activation::Relu}) {
    const Mlp m = Mlp::random(MlpArchitecture::symmetric(6, {5, 5}, act), 33);
    CHECK(gradient_check(ModelKind::Ngm, m, x, &c, cfg) < 1e-4);
    CHECK(gradient_check(ModelKind::Ngr, m, x, nullptr, cfg) < 1e-4);
    cfg.ngr_log_scaling = true;
    CHECK(gradient_check(ModelKind::Ngr, m, x, nullptr, cfg) < 1e-4);
    cfg.ngr_log_scaling = false;
  }
}

TEST_CASE("without penalties the gradient is plain backpropagation") {
  const FeatureSchema s = continuous_schema(2);
  Mlp m = Mlp::zeros(MlpArchitecture{{2, 2}, Activation::Identity});
  m.weights[0] << 0.5, -1, 2, 0.25;
  m.biases[0] << 0.1, -0.2;
  const EncodedMatrix x = random_encoded(6, s, 7);
  TrainConfig cfg;
  cfg.lambda_self = 0;
  cfg.gamma_sparsity = 0;
  const Mlp g = loss_gradient(ModelKind::Ngr, m, x, nullptr, cfg);
  // Linear model: dL/dW = 2 X^T (X W + b - X), dL/db = 2 * colsum(residual).
  Eigen::MatrixXd r = x.values * m.weights[0];
  r.rowwise() += m.biases[0].transpose();
  r -= x.values;
  CHECK((g.weights[0] - 2.0 * x.values.transpose() * r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.biases[0] - 2.0 * r.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero weights get no penalty subgradient") {
  const FeatureSchema s = continuous_schema(2);
  Mlp m = two_by_two(0, 1, 1, 0);
  const EncodedMatrix zx{Eigen::MatrixXd::Zero(3, 2), s, ColumnStats::identity(2)};
  TrainConfig cfg;
  cfg.lambda = 1;
  cfg.gamma_sparsity = 1;
  const Mlp g = loss_gradient(ModelKind::Ngr, m, zx, nullptr, cfg);
  CHECK(g.weights[0](0, 0) == 0.0);
  CHECK(g.weights[0](1, 1) == 0.0);
  CHECK(g.weights[0](0, 1) != 0.0);
}

TEST_CASE("training is deterministic and independent of row order") {
  const auto syn = synth_from_precision(chain_precision(3), 300, 4);
  const EncodedMatrix x = encode_dataset(syn.data);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  const Mlp init = Mlp::random(MlpArchitecture::symmetric(3, {6}), 1);
  const Objective obj = ngr_objective(x.schema, cfg);
  const TrainResult a = train(init, x.values, obj, cfg);
  const TrainResult b = train(init, x.values, obj, cfg);
  CHECK(a.model == b.model);
  CHECK(a.loss_history == b.loss_history);
  const Eigen::MatrixXd reversed = x.values.colwise().reverse();
  CHECK(train(init, reversed, obj, cfg).model == a.model);
  cfg.seed = 1;
  CHECK_FALSE(train(init, x.values, obj, cfg).model == a.model);
}

TEST_CASE("training reduces the objective") {
  const auto syn = synth_from_precision(chain_precision(4), 500, 6);
  const EncodedMatrix x = encode_dataset(syn.data);
  TrainConfig cfg;
  cfg.epochs = 30;
  const TrainResult r = train(Mlp::random(MlpArchitecture::symmetric(4, {8}), 2), x.values, ngr_objective(x.schema, cfg), cfg);
  CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("divergence raises a numeric error") {
  const auto syn = synth_from_precision(chain_precision(3), 200, 6);
  const EncodedMatrix x = encode_dataset(syn.data);
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train(Mlp::random(MlpArchitecture::symmetric(3, {4}), 2), x.values, ngr_objective(x.schema, cfg), cfg),
                  NumericError);
}

TEST_CASE("freeze masks") {
  const auto syn = synth_from_precision(chain_precision(3), 200, 8);
  const EncodedMatrix x = encode_dataset(syn.data);
  TrainConfig cfg;
  cfg.epochs = 4;
  const auto arch = MlpArchitecture::symmetric(3, {5});
  const Mlp init = Mlp::random(arch, 3);
  const Objective obj = ngr_objective(x.schema, cfg);

  CHECK(freeze_mask_train(init, ParamMask::all(arch), x.values, obj, cfg).model == init);
  CHECK(freeze_mask_train(init, ParamMask::none(arch), x.values, obj, cfg).model == train(init, x.values, obj, cfg).model);

  ParamMask first = ParamMask::none(arch);
  first.weights[0].setConstant(true);
  first.biases[0].setConstant(true);
  cfg.epochs = 100;  // 100 epochs of one batch each: 100 steps
  cfg.batch_size = 256;
  const Mlp out = freeze_mask_train(init, first, x.values, obj, cfg).model;
  CHECK(out.weights[0] == init.weights[0]);
  CHECK(out.biases[0] == init.biases[0]);
  CHECK(out.weights[1] != init.weights[1]);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.log_epsilon = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(MlpArchitecture({{3, 4, 2}}).validate(), ConfigError);
}

TEST_CASE("model serialization round-trips bit for bit") {
  const auto syn = synth_from_precision(chain_precision(3), 300, 2);
  TrainConfig cfg;
  cfg.epochs = 3;
  ArchSpec arch;
  arch.hidden = {6};
  const NgmModel ngm = train_local_ngm(syn.data, syn.graph, arch, cfg);
  const std::string bytes = serialize_model(ngm);
  const AnyModel back = deserialize_model(bytes);
  REQUIRE(std::holds_alternative<NgmModel>(back));
  const auto& m = std::get<NgmModel>(back);
  CHECK(m.mlp == ngm.mlp);
  CHECK(m.graph == ngm.graph);
  CHECK(m.stats == ngm.stats);
  CHECK(m.residual_std == ngm.residual_std);
  CHECK(m.mask_complement.values == ngm.mask_complement.values);
  CHECK(m.training_rows == 300);
  CHECK(serialize_model(back) == bytes);
  CHECK(content_hash(bytes) == content_hash(serialize_model(back)));

  NgrModel ngr = train_local_ngr(syn.data, arch, cfg);
  extract_graph(ngr);
  const std::string rb = serialize_model(ngr);
  const AnyModel rback = deserialize_model(rb);
  REQUIRE(std::holds_alternative<NgrModel>(rback));
  CHECK(std::get<NgrModel>(rback).extracted_graph == ngr.extracted_graph);
  CHECK(serialize_model(rback) == rb);
}

TEST_CASE("corrupt model documents are rejected") {
  const auto syn = synth_from_precision(chain_precision(2), 100, 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  ArchSpec arch;
  arch.hidden = {3};
  const std::string bytes = serialize_model(train_local_ngr(syn.data, arch, cfg));
  CHECK_THROWS_AS(deserialize_model("NOTAMODEL"), ConfigError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), ConfigError);
  std::string bad = bytes;
  bad[8] = 99;  // format version
  CHECK_THROWS_AS(deserialize_model(bad), ConfigError);
}
