#include "fedngm/ngr.hpp"

#include <algorithm>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"
#include "fedngm/train.hpp"

namespace fedngm {

namespace {

NgrModel fit_ngr(EncodedMatrix x, const ArchSpec& arch, const TrainConfig& cfg) {
  NgrModel m;
  m.kind = ModelKind::Ngr;
  const Mlp init = Mlp::random(arch.for_dim(x.dim()), derive_seed(cfg.seed, "init"), cfg.init_scale);
  m.mlp = train(init, x.values, ngr_objective(x.schema, cfg), cfg).model;
  m.schema = std::move(x.schema);
  m.stats = std::move(x.stats);
  record_training_stats(m, x.values);
  return m;
}

}  // namespace

NgrModel train_local_ngr(const Dataset& d, const ArchSpec& arch, const TrainConfig& cfg) {
  return fit_ngr(encode_dataset(d), arch, cfg);
}

NgrModel train_global_ngr(std::span<const EncodedMatrix> client_samples, const ArchSpec& arch,
                          const TrainConfig& cfg, Weighting weighting) {
  if (client_samples.empty()) throw ConfigError("train_global_ngr: no client samples");
  const std::vector<std::string> names = client_samples.front().schema.names();
  std::vector<FeatureSchema> schemas;
  for (const auto& s : client_samples) {
    if (s.schema.names() != names) throw SchemaError("client samples do not share the global variable list");
    schemas.push_back(s.schema);
  }
  if (weighting == Weighting::Equal) {
    for (const auto& s : client_samples)
      if (static_cast<double>(s.rows()) > 1.1 * static_cast<double>(client_samples.front().rows()) ||
          static_cast<double>(client_samples.front().rows()) > 1.1 * static_cast<double>(s.rows()))
        throw ConfigError("equal weighting needs per-client sample counts within 10% of each other");
  }
  return fit_ngr(pool_encoded(client_samples, union_schema(schemas, names)), arch, cfg);
}

double relative_tau(const Mlp& m, double relative) {
  return relative * symmetrize(path_matrix(m)).maxCoeff();
}

double default_tau(const Mlp& m) { return std::max(relative_tau(m), kDefaultAbsoluteTau); }

DependencyGraph extract_graph(NgrModel& m, std::optional<double> tau) {
  const double t = tau ? *tau : default_tau(m.mlp);
  if (!m.extracted_graph || m.extracted_tau != t) {
    m.extracted_graph = graph_from_path_matrix(path_matrix(m.mlp), m.schema, t);
    m.extracted_tau = t;
  }
  return *m.extracted_graph;
}

}  // namespace fedngm
