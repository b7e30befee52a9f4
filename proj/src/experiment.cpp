#include "fedngm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "fedngm/config.hpp"
#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"
#include "fedngm/synth.hpp"

namespace fedngm {

ScenarioConfig ScenarioConfig::defaults() {
  ScenarioConfig c;
  c.federation.samples_per_client = 5000;
  c.federation.arch.hidden = {64};
  c.federation.local_train.epochs = 60;
  c.federation.local_train.learning_rate = 3e-3;
  c.federation.global_train = c.federation.local_train;
  return c;
}

ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig c) {
  try {
    static const std::set<std::string> known = {"name", "n_features", "structure", "edge_density", "rows_per_client",
                                                "n_clients", "public_fraction", "bias_fraction", "n_binary",
                                                "n_categorical", "cv_folds", "targets", "federation", "seed"};
    for (const auto& [k, v] : j.items())
      if (!known.contains(k)) throw ConfigError("scenario: unknown key '" + k + "'");
    c.name = j.value("name", c.name);
    c.n_features = j.value("n_features", c.n_features);
    c.structure = j.value("structure", c.structure);
    c.edge_density = j.value("edge_density", c.edge_density);
    c.rows_per_client = j.value("rows_per_client", c.rows_per_client);
    c.n_clients = j.value("n_clients", c.n_clients);
    c.public_fraction = j.value("public_fraction", c.public_fraction);
    c.bias_fraction = j.value("bias_fraction", c.bias_fraction);
    c.n_binary = j.value("n_binary", c.n_binary);
    c.n_categorical = j.value("n_categorical", c.n_categorical);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.targets = j.value("targets", c.targets);
    c.seed = j.value("seed", c.seed);
    if (j.contains("federation")) c.federation = federation_config_from_json(j.at("federation"), c.federation);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (c.structure != "chain" && c.structure != "random") throw ConfigError("scenario: structure must be chain or random");
  if (c.n_clients < 1 || c.rows_per_client < 2) throw ConfigError("scenario: need >= 1 client and >= 2 rows per client");
  if (c.cv_folds < 2) throw ConfigError("scenario: cv_folds must be >= 2");
  if (c.n_binary + c.n_categorical + 2 > c.n_features)
    throw ConfigError("scenario: too many discrete features for n_features");
  return c;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) throw ConfigError("k-fold needs 2 <= k <= n");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "kfold"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

TargetKind target_kind(const Feature& f) {
  if (!f.is_categorical()) return TargetKind::Continuous;
  return f.values.size() == 2 ? TargetKind::Binary : TargetKind::Categorical;
}

std::map<std::string, MetricRecord> evaluate_model(const GraphicalModel& m, const Dataset& data,
                                                   const std::vector<std::string>& targets) {
  const Dataset d = data.select_features(m.schema.names()).conform_to(m.schema);
  std::map<std::string, MetricRecord> out;
  for (const auto& t : targets) {
    const std::size_t j = m.schema.index_of(t);
    const Eigen::MatrixXd pred = predict_feature(m, d, t);
    const Eigen::VectorXd truth = d.cells().col(static_cast<Eigen::Index>(j));
    out.emplace(t, evaluate_predictions(target_kind(m.schema[j]),
                                        std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                                        pred));
  }
  return out;
}

namespace {

double quantile(Eigen::VectorXd v, double q) {
  std::sort(v.data(), v.data() + v.size());
  const auto i = static_cast<Eigen::Index>(std::floor(q * static_cast<double>(v.size() - 1)));
  return v(i);
}

}  // namespace

ScenarioData make_scenario_data(const ScenarioConfig& cfg) {
  const auto total = static_cast<std::size_t>(
      std::ceil(static_cast<double>(cfg.rows_per_client * cfg.n_clients) / (1.0 - cfg.public_fraction) * 1.05));
  SynthResult syn = cfg.structure == "chain"
                        ? synth_from_precision(chain_precision(cfg.n_features), total, derive_seed(cfg.seed, "population"))
                        : synth_ggm(cfg.n_features, cfg.edge_density, total, derive_seed(cfg.seed, "population"));

  // Discretize trailing features: binary above the 84th percentile, categorical by terciles.
  const std::size_t d = cfg.n_features;
  std::vector<Feature> features = syn.data.schema().features();
  Eigen::MatrixXd cells = syn.data.cells();
  for (std::size_t k = 0; k < cfg.n_categorical + cfg.n_binary; ++k) {
    const std::size_t j = d - 1 - k;
    const auto col = static_cast<Eigen::Index>(j);
    const Eigen::VectorXd v = cells.col(col);
    if (k < cfg.n_categorical) {
      const double lo = quantile(v, 1.0 / 3.0), hi = quantile(v, 2.0 / 3.0);
      for (Eigen::Index i = 0; i < v.size(); ++i) cells(i, col) = v(i) <= lo ? 1.0 : (v(i) <= hi ? 2.0 : 0.0);
      features[j] = Feature::categorical(features[j].name, {"high", "low", "mid"});
    } else {
      const double t = quantile(v, 0.84);
      for (Eigen::Index i = 0; i < v.size(); ++i) cells(i, col) = v(i) > t ? 1.0 : 0.0;
      features[j] = Feature::categorical(features[j].name, {"0", "1"});
    }
  }
  Dataset population("population", FeatureSchema(std::move(features)), std::move(cells));

  std::vector<SplitPredicate> preds;
  const std::size_t n_cont = d - cfg.n_binary - cfg.n_categorical;
  for (std::size_t c = 0; c < cfg.n_clients; ++c) {
    SplitPredicate p;
    p.feature = population.schema()[c % n_cont].name;
    p.lo = 0.5;
    p.target_fraction = cfg.bias_fraction;
    preds.push_back(std::move(p));
  }
  SplitOptions opts;
  opts.public_fraction = cfg.public_fraction;
  opts.client_size = cfg.rows_per_client;
  SplitResult split = biased_split(population, preds, cfg.n_clients, derive_seed(cfg.seed, "split"), opts);
  return {std::move(population), std::move(syn.graph), std::move(split)};
}

namespace {

struct Summary {
  std::optional<double> mean, sd;
};

Summary summarize(const std::vector<double>& v) {
  if (v.empty()) return {};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

std::string fmt(const Summary& s) {
  if (!s.mean) return "n/a";
  char buf[64];
  if (s.sd) std::snprintf(buf, sizeof buf, "%.4f ± %.4f", *s.mean, *s.sd);
  else std::snprintf(buf, sizeof buf, "%.4f", *s.mean);
  return buf;
}

// Rows of one results table: model label -> (target, metric) -> summary.
using Table = std::vector<std::pair<std::string, std::map<std::pair<std::string, std::string>, Summary>>>;

std::map<std::pair<std::string, std::string>, Summary> single(const std::map<std::string, MetricRecord>& recs) {
  std::map<std::pair<std::string, std::string>, Summary> out;
  for (const auto& [t, r] : recs)
    for (const auto& [name, v] : r.values) out[{t, name}] = v ? Summary{*v, std::nullopt} : Summary{};
  return out;
}

std::string render(const std::string& title, const Table& table) {
  std::vector<std::pair<std::string, std::string>> cols;
  for (const auto& [label, row] : table)
    for (const auto& [key, s] : row)
      if (std::find(cols.begin(), cols.end(), key) == cols.end()) cols.push_back(key);
  std::ostringstream out;
  out << "### " << title << "\n\n| model |";
  for (const auto& [t, m] : cols) out << ' ' << t << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& [label, row] : table) {
    out << "| " << label << " |";
    for (const auto& key : cols) {
      auto it = row.find(key);
      out << ' ' << (it == row.end() ? "" : fmt(it->second)) << " |";
    }
    out << '\n';
  }
  return out.str() + "\n";
}

nlohmann::ordered_json table_json(const Table& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& [label, row] : table)
    for (const auto& [key, s] : row) {
      nlohmann::ordered_json r;
      r["model"] = label;
      r["feature"] = key.first;
      r["metric"] = key.second;
      if (s.mean) {
        r["mean"] = *s.mean;
        if (s.sd) r["std"] = *s.sd;
      } else {
        r["mean"] = "n/a";
      }
      rows.push_back(std::move(r));
    }
  return rows;
}

}  // namespace

ExperimentReport run_experiment(const ScenarioConfig& cfg) {
  const ScenarioData data = make_scenario_data(cfg);
  std::vector<std::string> targets = cfg.targets;
  if (targets.empty()) {
    const auto& s = data.population.schema();
    std::size_t cont = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
      if (s[j].is_categorical() || cont++ < 2) targets.push_back(s[j].name);
  }

  FederationConfig fed = cfg.federation;
  fed.seed = derive_seed(cfg.seed, "federation");
  GraphicalModel global;
  std::map<std::string, AnyModel> locals;
  std::vector<std::string> global_features;
  std::size_t global_edges = 0;
  Transcript transcript;
  std::optional<DependencyGraph> global_graph;
  if (fed.mode == ModelKind::Ngm) {
    auto r = run_federated_ngm(data.split.clients, fed);
    global = r.global;
    for (auto& [id, m] : r.local_models) locals.emplace(id, std::move(m));
    global_features = r.global_graph.nodes();
    global_edges = r.global_graph.edge_count();
    global_graph = r.global_graph;
    transcript = std::move(r.transcript);
  } else {
    auto r = run_federated_ngr(data.split.clients, fed);
    global = r.global;
    for (auto& [id, m] : r.local_models) locals.emplace(id, std::move(m));
    global_features = r.global_variables;
    global_edges = r.global.extracted_graph ? r.global.extracted_graph->edge_count() : 0;
    transcript = std::move(r.transcript);
  }
  std::vector<std::string> eval_targets;
  for (const auto& t : targets)
    if (std::find(global_features.begin(), global_features.end(), t) != global_features.end()) eval_targets.push_back(t);

  Table private_table, public_table;
  std::string jsonl;
  for (const auto& client : data.split.clients) {
    const std::string id = client.name();
    // k-fold CV of the client's own model type on its own data.
    std::map<std::pair<std::string, std::string>, std::vector<double>> fold_values;
    const auto folds = kfold_indices(client.rows(), cfg.cv_folds, derive_seed(cfg.seed, "cv/" + id));
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_rows;
      std::vector<bool> in_test(client.rows(), false);
      for (auto r : folds[f]) in_test[r] = true;
      for (std::size_t r = 0; r < client.rows(); ++r)
        if (!in_test[r]) train_rows.push_back(r);
      const Dataset train = client.select_rows(train_rows, id);
      const Dataset test = client.select_rows(folds[f], id + "-test");
      TrainConfig t = fed.local_train;
      t.seed = derive_seed(cfg.seed, "cv/" + id + "/" + std::to_string(f));
      const GraphicalModel m =
          fed.mode == ModelKind::Ngm
              ? static_cast<GraphicalModel>(train_local_ngm(train, *global_graph, fed.arch, t))
              : static_cast<GraphicalModel>(train_local_ngr(train.select_features(global_features), fed.arch, t));
      for (const auto& [target, rec] : evaluate_model(m, test, eval_targets))
        for (const auto& [name, v] : rec.values)
          if (v) fold_values[{target, name}].push_back(*v);
    }
    std::map<std::pair<std::string, std::string>, Summary> cv;
    for (const auto& t : eval_targets)
      for (const auto& [key, vals] : fold_values)
        if (key.first == t) cv[key] = summarize(vals);
    private_table.emplace_back(id + "-local (" + std::to_string(cfg.cv_folds) + "-fold CV)", std::move(cv));
    const auto global_on_client = evaluate_model(global, client, eval_targets);
    private_table.emplace_back("global on " + id, single(global_on_client));
    for (const auto& [t, r] : global_on_client) jsonl += metrics_to_jsonl("global@" + id, t, r);
  }
  for (const auto& [id, m] : locals) {
    const auto recs = evaluate_model(base_of(m), data.split.public_data, eval_targets);
    public_table.emplace_back(id + "-local", single(recs));
    for (const auto& [t, r] : recs) jsonl += metrics_to_jsonl(id + "@public", t, r);
  }
  const auto global_public = evaluate_model(global, data.split.public_data, eval_targets);
  public_table.emplace_back("global", single(global_public));
  for (const auto& [t, r] : global_public) jsonl += metrics_to_jsonl("global@public", t, r);

  ExperimentReport rep;
  rep.document["scenario"] = cfg.name;
  rep.document["seed"] = cfg.seed;
  rep.document["mode"] = to_string(fed.mode);
  rep.document["n_features"] = cfg.n_features;
  rep.document["rows_per_client"] = cfg.rows_per_client;
  rep.document["clients"] = cfg.n_clients;
  rep.document["public_rows"] = data.split.public_data.rows();
  rep.document["global_features"] = global_features;
  rep.document["global_edges"] = global_edges;
  rep.document["messages"] = transcript.entries().size();
  rep.document["targets"] = eval_targets;
  rep.document["private"] = table_json(private_table);
  rep.document["public"] = table_json(public_table);
  rep.markdown = "# Experiment report: " + cfg.name + "\n\n" +
                 render("Client data (local models: k-fold CV; global model: full client data)", private_table) +
                 render("Public hold-out", public_table);
  rep.metrics_jsonl = std::move(jsonl);
  return rep;
}

}  // namespace fedngm
