// fedngm command-line driver. Every subcommand reads a JSON config, takes a seed and writes
// its artifacts under --out. Exit codes: 0 ok, 2 config/schema error, 3 protocol or privacy
// gate error, 4 numeric failure, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedngm/config.hpp"
#include "fedngm/csv.hpp"
#include "fedngm/error.hpp"
#include "fedngm/experiment.hpp"
#include "fedngm/federation.hpp"
#include "fedngm/log.hpp"
#include "fedngm/metrics.hpp"
#include "fedngm/ngm.hpp"
#include "fedngm/ngr.hpp"
#include "fedngm/rng.hpp"
#include "fedngm/sampling.hpp"
#include "fedngm/stitching.hpp"
#include "fedngm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedngm;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

// Config document plus the directory relative paths are resolved against.
struct Config {
  json doc = json::object();
  fs::path base;

  fs::path path(const std::string& key) const {
    if (!doc.contains(key)) throw ConfigError("config: missing '" + key + "'");
    return resolve(doc.at(key).get<std::string>());
  }
  std::optional<fs::path> optional_path(const std::string& key) const {
    if (!doc.contains(key)) return std::nullopt;
    return resolve(doc.at(key).get<std::string>());
  }
  std::vector<fs::path> paths(const std::string& key) const {
    if (!doc.contains(key)) throw ConfigError("config: missing '" + key + "'");
    std::vector<fs::path> out;
    for (const auto& p : doc.at(key)) out.push_back(resolve(p.get<std::string>()));
    return out;
  }
  json section(const std::string& key) const { return doc.contains(key) ? doc.at(key) : json::object(); }
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base / p; }
};

Config read_config(const Common& c) {
  Config cfg;
  if (!c.config.empty()) {
    cfg.doc = load_json_file(c.config);
    if (!cfg.doc.is_object()) throw ConfigError("config '" + c.config + "' is not a JSON object");
    cfg.base = fs::path(c.config).parent_path();
  }
  return cfg;
}

void check_keys(const Config& cfg, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : cfg.doc.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("config: unknown key '" + k + "'");
  }
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

Dataset load_data(const Config& cfg, const std::string& key) {
  const auto hints_path = cfg.optional_path("schema");
  return load_csv(cfg.path(key), hints_path ? SchemaHints::from_json_file(*hints_path) : SchemaHints{});
}

DependencyGraph load_graph(const fs::path& p) { return graph_from_json(read_file(p)); }

void write_text(const fs::path& p, const std::string& text) { write_file(p, text); }

TrainConfig train_config(const Config& cfg, std::uint64_t seed) {
  TrainConfig t = train_config_from_json(cfg.section("train"));
  t.seed = seed;
  return t;
}

ModelKind mode_of(const Config& cfg) { return model_kind_from_string(cfg.doc.value("mode", std::string("ngm"))); }

// ---------------------------------------------------------------------------------------------

void cmd_synth(const Common& c) {
  const Config cfg = read_config(c);
  ScenarioConfig sc = scenario_from_json(cfg.doc);
  sc.seed = c.seed;
  const ScenarioData data = make_scenario_data(sc);
  const fs::path out = out_dir(c);
  write_csv(data.population, out / "population.csv");
  write_text(out / "schema.json", schema_hints_text(data.population.schema()));
  write_text(out / "truth_graph.json", graph_to_json(data.truth));
}

void cmd_split(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"data", "schema", "n_clients", "predicates", "public_fraction", "client_size"});
  const Dataset d = load_data(cfg, "data");
  std::vector<SplitPredicate> preds;
  try {
    for (const auto& p : cfg.doc.value("predicates", json::array())) {
      SplitPredicate sp;
      sp.feature = p.at("feature").get<std::string>();
      if (p.contains("values")) sp.values = p.at("values").get<std::vector<std::string>>();
      if (p.contains("lo")) sp.lo = p.at("lo").get<double>();
      if (p.contains("hi")) sp.hi = p.at("hi").get<double>();
      sp.target_fraction = p.value("target_fraction", sp.target_fraction);
      preds.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("split predicates: ") + e.what());
  }
  SplitOptions opts;
  opts.public_fraction = cfg.doc.value("public_fraction", opts.public_fraction);
  opts.client_size = cfg.doc.value("client_size", opts.client_size);
  const std::size_t n = cfg.doc.value("n_clients", preds.size());
  const SplitResult r = biased_split(d, preds, n, c.seed, opts);
  const fs::path out = out_dir(c);
  for (const auto& client : r.clients) write_csv(client, out / (client.name() + ".csv"));
  write_csv(r.public_data, out / "public.csv");
  write_text(out / "schema.json", schema_hints_text(d.schema()));
}

void cmd_recover_graph(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"data", "schema", "ridge", "threshold"});
  const Dataset d = load_data(cfg, "data");
  RecoveryConfig r;
  r.ridge = cfg.doc.value("ridge", r.ridge);
  r.threshold = cfg.doc.value("threshold", r.threshold);
  const DependencyGraph g = recover_graph_precision(encode_dataset(d), r.ridge, r.threshold);
  write_text(out_dir(c) / "graph.json", graph_to_json(g));
}

void cmd_train_local(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"mode", "data", "schema", "graph", "arch", "train"});
  const Dataset d = load_data(cfg, "data");
  const ArchSpec arch = arch_from_json(cfg.section("arch"));
  const TrainConfig t = train_config(cfg, c.seed);
  const fs::path out = out_dir(c);
  if (mode_of(cfg) == ModelKind::Ngm) {
    const auto gp = cfg.optional_path("graph");
    const DependencyGraph g =
        gp ? load_graph(*gp) : recover_graph_precision(encode_dataset(d), RecoveryConfig{}.ridge, RecoveryConfig{}.threshold);
    save_model(train_local_ngm(d, g, arch, t), out / "model.bin");
  } else {
    NgrModel m = train_local_ngr(d, arch, t);
    write_text(out / "graph.json", graph_to_json(extract_graph(m)));
    save_model(m, out / "model.bin");
  }
}

void cmd_merge(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"graphs", "min_clients_k"});
  std::vector<DependencyGraph> graphs;
  for (const auto& p : cfg.paths("graphs")) graphs.push_back(load_graph(p));
  FederationConfig fc;
  fc.min_clients_k = cfg.doc.value("min_clients_k", fc.min_clients_k);
  if (privacy_gate(graphs.size(), fc) == GateDecision::Deny)
    throw ProtocolError("privacy gate: " + std::to_string(graphs.size()) + " graphs < k=" +
                        std::to_string(fc.min_clients_k));
  write_text(out_dir(c) / "graph.json", graph_to_json(merge_graphs(graphs)));
}

void cmd_train_global(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"models", "graph", "federation"});
  FederationConfig fc = federation_config_from_json(cfg.section("federation"));
  fc.seed = c.seed;
  std::vector<ClientContribution> parts;
  // Client ids are the model paths as written in the config, so seeds do not depend on list order.
  const auto model_paths = cfg.paths("models");
  for (std::size_t i = 0; i < model_paths.size(); ++i) {
    AnyModel m = load_model(model_paths[i]);
    const std::size_t rows = base_of(m).training_rows;
    parts.push_back({cfg.doc.at("models").at(i).get<std::string>(), std::move(m), rows});
  }
  std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < parts.size(); ++i)
    if (parts[i].id == parts[i - 1].id) throw ConfigError("train-global: model '" + parts[i].id + "' listed twice");
  if (privacy_gate(parts.size(), fc) == GateDecision::Deny)
    throw ProtocolError("privacy gate: " + std::to_string(parts.size()) + " client models < k=" +
                        std::to_string(fc.min_clients_k));
  std::optional<DependencyGraph> g;
  if (auto gp = cfg.optional_path("graph")) g = load_graph(*gp);
  const AnyModel global = distill_global(parts, g, fc);
  save_model(global, out_dir(c) / "global.bin");
}

void cmd_stitch(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"global", "data", "schema", "graph", "stitch", "train"});
  const AnyModel global = load_model(cfg.path("global"));
  const Dataset d = load_data(cfg, "data");
  std::optional<DependencyGraph> g;
  if (auto gp = cfg.optional_path("graph")) g = load_graph(*gp);
  StitchOptions opts;
  opts.seed = derive_seed(c.seed, "stitch");
  const json s = cfg.section("stitch");
  try {
    if (s.contains("extra_hidden_per_layer")) opts.extra_hidden_per_layer = s.at("extra_hidden_per_layer").get<std::size_t>();
    const std::string init = s.value("init", std::string("standard"));
    if (init == "zero") opts.init = NewWeightInit::Zero;
    else if (init != "standard") throw ConfigError("stitch: init must be zero or standard");
    opts.init_scale = s.value("init_scale", opts.init_scale);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stitch: ") + e.what());
  }
  const StitchedModel st = stitch_architecture(global, d.schema(), g, opts);
  save_model(train_personalized(st, d, train_config(cfg, c.seed)), out_dir(c) / "personalized.bin");
}

void cmd_sample(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"model", "n", "sampler"});
  const AnyModel m = load_model(cfg.path("model"));
  const std::size_t n = cfg.doc.value("n", std::size_t{1000});
  const EncodedMatrix x = sample(base_of(m), n, c.seed, sampler_from_json(cfg.section("sampler")));
  write_csv(decode(x, "samples"), out_dir(c) / "samples.csv");
}

// Builds a dataset over the model schema from a CSV holding only some of its columns.
// Columns absent from the file are filled with placeholders and marked unobserved.
Dataset observed_frame(const GraphicalModel& m, const Dataset& d, std::vector<std::string>& observed) {
  Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.rows()),
                                                static_cast<Eigen::Index>(m.schema.size()));
  for (std::size_t j = 0; j < m.schema.size(); ++j) {
    const Feature& f = m.schema[j];
    if (!d.schema().find(f.name)) continue;
    observed.push_back(f.name);
    const std::vector<std::string> one{f.name};
    const Dataset col = d.select_features(one).conform_to(m.schema.select(one));
    cells.col(static_cast<Eigen::Index>(j)) = col.cells().col(0);
  }
  return Dataset(d.name(), m.schema, std::move(cells));
}

void cmd_infer(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"model", "data", "schema", "targets", "max_iterations", "tolerance"});
  const AnyModel any = load_model(cfg.path("model"));
  const GraphicalModel& m = base_of(any);
  const Dataset d = load_data(cfg, "data");
  std::vector<std::string> observed;
  const Dataset frame = observed_frame(m, d, observed);
  std::vector<std::string> targets = cfg.doc.value("targets", std::vector<std::string>{});
  if (targets.empty())
    for (const auto& name : m.schema.names())
      if (std::find(observed.begin(), observed.end(), name) == observed.end()) targets.push_back(name);
  if (targets.empty()) throw ConfigError("infer: every model feature is observed; nothing to infer");
  for (const auto& t : targets)
    if (std::find(observed.begin(), observed.end(), t) != observed.end())
      observed.erase(std::find(observed.begin(), observed.end(), t));
  InferenceConfig ic;
  ic.max_iterations = cfg.doc.value("max_iterations", ic.max_iterations);
  ic.tolerance = cfg.doc.value("tolerance", ic.tolerance);
  const BatchInference r = infer_batch(m, frame, observed, ic);
  if (!r.converged) log_warning("infer: iteration limit reached before convergence");
  const Dataset decoded = decode(EncodedMatrix{r.encoded, m.schema, m.stats}, d.name());
  write_csv(decoded.select_features(targets), out_dir(c) / "predictions.csv");
}

void cmd_evaluate(const Common& c) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"model", "data", "schema", "targets", "label"});
  const AnyModel any = load_model(cfg.path("model"));
  const GraphicalModel& m = base_of(any);
  const Dataset d = load_data(cfg, "data");
  std::vector<std::string> targets = cfg.doc.value("targets", m.schema.names());
  const std::string label = cfg.doc.value("label", cfg.path("model").stem().string());
  std::string jsonl;
  for (const auto& [feature, rec] : evaluate_model(m, d, targets)) jsonl += metrics_to_jsonl(label, feature, rec);
  write_text(out_dir(c) / "metrics.jsonl", jsonl);
}

struct FederateFlags {
  std::string mode, weighting;
  std::optional<std::size_t> min_clients;
};

void cmd_federate(const Common& c, const FederateFlags& f) {
  const Config cfg = read_config(c);
  check_keys(cfg, {"clients", "schema", "federation"});
  FederationConfig fc = federation_config_from_json(cfg.section("federation"));
  if (!f.mode.empty()) fc.mode = model_kind_from_string(f.mode);
  if (!f.weighting.empty()) fc.weighting = weighting_from_string(f.weighting);
  if (f.min_clients) fc.min_clients_k = *f.min_clients;
  fc.seed = c.seed;
  const auto hints_path = cfg.optional_path("schema");
  const SchemaHints hints = hints_path ? SchemaHints::from_json_file(*hints_path) : SchemaHints{};
  std::vector<Dataset> clients;
  for (const auto& p : cfg.paths("clients")) clients.push_back(load_csv(p, hints));

  const fs::path out = out_dir(c);
  fs::create_directories(out / "local");
  auto save_transcript = [&](const Transcript& t) { write_text(out / "transcript.jsonl", t.to_jsonl()); };
  if (fc.mode == ModelKind::Ngm) {
    const NgmFederationResult r = run_federated_ngm(clients, fc);
    save_model(r.global, out / "global.bin");
    write_text(out / "graph.json", graph_to_json(r.global_graph));
    for (const auto& [id, m] : r.local_models) save_model(m, out / "local" / (id + ".bin"));
    save_transcript(r.transcript);
  } else {
    const NgrFederationResult r = run_federated_ngr(clients, fc);
    save_model(r.global, out / "global.bin");
    if (r.global.extracted_graph) write_text(out / "graph.json", graph_to_json(*r.global.extracted_graph));
    for (const auto& [id, m] : r.local_models) save_model(m, out / "local" / (id + ".bin"));
    save_transcript(r.transcript);
  }
  json summary = to_json(fc);
  write_text(out / "federation.json", summary.dump(2) + "\n");
}

void cmd_report(const Common& c) {
  const Config cfg = read_config(c);
  ScenarioConfig sc = scenario_from_json(cfg.doc, ScenarioConfig::defaults());
  sc.seed = c.seed;
  const ExperimentReport r = run_experiment(sc);
  const fs::path out = out_dir(c);
  write_text(out / "report.json", r.document.dump(2) + "\n");
  write_text(out / "report.md", r.markdown);
  write_text(out / "metrics.jsonl", r.metrics_jsonl);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "random seed")->required();
  sub->add_option("--out", c.out, "output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated neural graphical models"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  Common common;
  FederateFlags fed;
  std::vector<std::pair<CLI::App*, std::function<void()>>> commands;
  auto add = [&](const char* name, const char* help, std::function<void()> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, common);
    commands.emplace_back(sub, std::move(fn));
    return sub;
  };
  add("synth", "generate a synthetic population and its true graph", [&] { cmd_synth(common); });
  add("split", "split a dataset into biased clients and a public hold-out", [&] { cmd_split(common); });
  add("recover-graph", "estimate a dependency graph from data", [&] { cmd_recover_graph(common); });
  add("train-local", "train a client NGM or NGR", [&] { cmd_train_local(common); });
  add("merge", "merge client graphs", [&] { cmd_merge(common); });
  add("train-global", "distill a global model from client models", [&] { cmd_train_global(common); });
  add("stitch", "personalize a global model with client-specific features", [&] { cmd_stitch(common); });
  add("sample", "draw samples from a model", [&] { cmd_sample(common); });
  add("infer", "conditional inference of unobserved features", [&] { cmd_infer(common); });
  add("evaluate", "score a model's per-feature predictions", [&] { cmd_evaluate(common); });
  CLI::App* federate = add("federate", "run the full federated protocol", [&] { cmd_federate(common, fed); });
  federate->add_option("--mode", fed.mode, "ngm or ngr")->check(CLI::IsMember({"ngm", "ngr"}));
  federate->add_option("--weighting", fed.weighting, "equal or proportional")
      ->check(CLI::IsMember({"equal", "proportional"}));
  federate->add_option("--min-clients", fed.min_clients, "privacy gate k");
  add("report", "run the synthetic federated experiment and write result tables", [&] { cmd_report(common); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (verbose) set_log_level(LogLevel::Info);

  try {
    for (auto& [sub, fn] : commands)
      if (sub->parsed()) fn();
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "protocol error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
