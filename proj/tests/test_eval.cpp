#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include <json.hpp>

#include "fedngm/error.hpp"
#include "fedngm/experiment.hpp"
#include "fedngm/metrics.hpp"
#include "support.hpp"

using namespace fedngm;
using namespace fedngm::testing;

namespace {

double value(const MetricRecord& r, const std::string& name) {
  const auto v = r.get(name);
  REQUIRE(v.has_value());
  return *v;
}

ScenarioConfig tiny_scenario() {
  ScenarioConfig c = ScenarioConfig::defaults();
  c.name = "tiny";
  c.n_features = 6;
  c.rows_per_client = 300;
  c.cv_folds = 3;
  c.federation.samples_per_client = 300;
  c.federation.arch.hidden = {8};
  c.federation.local_train.epochs = 5;
  c.federation.global_train.epochs = 5;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("continuous metrics") {
  const std::vector<double> truth{1, 2, 3, 4}, pred{1, 3, 2, 6};
  const MetricRecord r = evaluate_continuous(truth, pred);
  CHECK(value(r, "mae") == doctest::Approx(1.0));
  CHECK(value(r, "rmse") == doctest::Approx(std::sqrt(1.5)));
  const MetricRecord exact = evaluate_continuous(truth, truth);
  CHECK(value(exact, "mae") == 0.0);
  CHECK(value(exact, "rmse") == 0.0);
  const std::vector<double> short_pred{1, 2};
  CHECK_THROWS_AS(evaluate_continuous(truth, short_pred), ConfigError);
  CHECK_THROWS_AS(evaluate_continuous({}, {}), ConfigError);
}

TEST_CASE("binary metrics on a ten-row fixture") {
  // Positives score {0.9, 0.8, 0.4, 0.35}; 20 of 24 positive-negative pairs are ordered.
  // Ranked: P P N N P P N N N N, so AP = (1 + 1 + 3/5 + 4/6) / 4.
  const std::vector<int> truth{1, 1, 0, 0, 1, 1, 0, 0, 0, 0};
  const std::vector<double> scores{0.9, 0.8, 0.7, 0.6, 0.4, 0.35, 0.3, 0.2, 0.1, 0.05};
  const MetricRecord r = evaluate_binary(truth, scores);
  CHECK(value(r, "auc") == doctest::Approx(20.0 / 24.0));
  CHECK(value(r, "aupr") == doctest::Approx((1 + 1 + 0.6 + 4.0 / 6.0) / 4));
}

TEST_CASE("perfect and tied binary scores") {
  const std::vector<int> truth{1, 0, 1, 0, 0};
  const std::vector<double> perfect{1, 0, 1, 0, 0};
  const MetricRecord p = evaluate_binary(truth, perfect);
  CHECK(value(p, "auc") == 1.0);
  CHECK(value(p, "aupr") == 1.0);
  const std::vector<double> tied(5, 0.5);
  const MetricRecord t = evaluate_binary(truth, tied);
  CHECK(value(t, "auc") == doctest::Approx(0.5));
  CHECK(value(t, "aupr") == doctest::Approx(0.4));
}

TEST_CASE("single-class truth leaves AUC and AUPR undefined") {
  const std::vector<int> truth(6, 1);
  const std::vector<double> scores{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  const MetricRecord r = evaluate_binary(truth, scores);
  CHECK_FALSE(r.get("auc").has_value());
  CHECK_FALSE(r.get("aupr").has_value());
  const std::string jsonl = metrics_to_jsonl("m", "f", r);
  CHECK(jsonl.find("\"n/a\"") != std::string::npos);
}

TEST_CASE("categorical metrics on a ten-row fixture") {
  // Per class (tp, predicted, true): 0 -> (2, 3, 4), 1 -> (2, 3, 3), 2 -> (3, 4, 3).
  const std::vector<std::size_t> truth{0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
  const std::vector<std::size_t> pred{0, 0, 1, 2, 1, 1, 0, 2, 2, 2};
  const MetricRecord r = evaluate_categorical(truth, pred);
  CHECK(value(r, "micro_precision") == doctest::Approx(0.7));
  CHECK(value(r, "micro_recall") == doctest::Approx(0.7));
  CHECK(value(r, "macro_precision") == doctest::Approx((2.0 / 3 + 2.0 / 3 + 0.75) / 3));
  CHECK(value(r, "macro_recall") == doctest::Approx((0.5 + 2.0 / 3 + 1.0) / 3));
}

TEST_CASE("all-majority predictor has macro recall one half") {
  const std::vector<std::size_t> truth{0, 0, 0, 1, 1, 0, 0, 1, 0, 0};
  const std::vector<std::size_t> pred(10, 0);
  const MetricRecord r = evaluate_categorical(truth, pred);
  CHECK(value(r, "macro_recall") == 0.5);
  CHECK(value(r, "macro_precision") == doctest::Approx(0.35));
  // Zero convention also applies to a predicted class absent from the truth.
  const std::vector<std::size_t> t2{0, 0}, p2{0, 1};
  CHECK(value(evaluate_categorical(t2, p2), "macro_recall") == 0.25);
}

TEST_CASE("dispatch by target kind") {
  const std::vector<double> truth{0, 1, 1, 0};
  Eigen::MatrixXd scores(4, 2);
  scores << 0.9, 0.1, 0.2, 0.8, 0.4, 0.6, 0.7, 0.3;
  CHECK(value(evaluate_predictions(TargetKind::Binary, truth, scores), "auc") == 1.0);
  CHECK(value(evaluate_predictions(TargetKind::Categorical, truth, scores), "macro_recall") == 1.0);
  const Eigen::MatrixXd cont = Eigen::Map<const Eigen::VectorXd>(truth.data(), 4);
  CHECK(value(evaluate_predictions(TargetKind::Continuous, truth, cont), "rmse") == 0.0);
}

TEST_CASE("k-fold indices partition the data") {
  for (std::size_t n : {10u, 17u, 100u}) {
    const auto folds = kfold_indices(n, 5, 9);
    REQUIRE(folds.size() == 5);
    std::multiset<std::size_t> seen;
    for (const auto& f : folds) {
      seen.insert(f.begin(), f.end());
      CHECK(f.size() >= n / 5);
      CHECK(f.size() <= n / 5 + 1);
    }
    CHECK(seen.size() == n);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == n);
  }
  CHECK(kfold_indices(50, 5, 1) == kfold_indices(50, 5, 1));
  CHECK(kfold_indices(50, 5, 1) != kfold_indices(50, 5, 2));
  CHECK_THROWS_AS(kfold_indices(3, 5, 1), ConfigError);
}

TEST_CASE("scenario config rejects unknown keys") {
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json{{"n_feature", 3}}), ConfigError);
  CHECK(scenario_from_json(nlohmann::json{{"n_features", 7}}).n_features == 7);
}

TEST_CASE("experiment report structure and reproducibility") {
  const ScenarioConfig cfg = tiny_scenario();
  const ExperimentReport a = run_experiment(cfg);
  const ExperimentReport b = run_experiment(cfg);
  CHECK(a.document.dump() == b.document.dump());
  CHECK(a.markdown == b.markdown);
  CHECK(a.metrics_jsonl == b.metrics_jsonl);
  CHECK(a.document.at("scenario").get<std::string>() == "tiny");
  CHECK(a.markdown.find("global") != std::string::npos);
  for (int c = 1; c <= 3; ++c) CHECK(a.markdown.find("client" + std::to_string(c)) != std::string::npos);
  std::size_t lines = 0;
  for (char ch : a.metrics_jsonl) lines += ch == '\n';
  CHECK(lines > 0);
  const auto first = nlohmann::json::parse(a.metrics_jsonl.substr(0, a.metrics_jsonl.find('\n')));
  CHECK(first.contains("metric"));
  CHECK(first.contains("value"));
}
