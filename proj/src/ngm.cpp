#include "fedngm/ngm.hpp"

#include <algorithm>
#include <cmath>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"
#include "fedngm/train.hpp"

namespace fedngm {

std::string to_string(Weighting w) { return w == Weighting::Equal ? "equal" : "proportional"; }

Weighting weighting_from_string(const std::string& s) {
  if (s == "equal") return Weighting::Equal;
  if (s == "proportional") return Weighting::Proportional;
  throw ConfigError("unknown weighting '" + s + "' (expected equal or proportional)");
}

std::vector<std::size_t> sample_counts(Weighting w, std::span<const std::size_t> dataset_sizes, std::size_t base) {
  if (dataset_sizes.empty()) throw ConfigError("sample_counts: no clients");
  if (base < 1) throw ConfigError("samples_per_client must be >= 1");
  std::vector<std::size_t> out(dataset_sizes.size(), base);
  if (w == Weighting::Equal) return out;
  const std::size_t smallest = *std::min_element(dataset_sizes.begin(), dataset_sizes.end());
  if (smallest < 1) throw ConfigError("dataset sizes must be >= 1");
  for (std::size_t c = 0; c < out.size(); ++c)
    out[c] = static_cast<std::size_t>(std::llround(static_cast<double>(base) * static_cast<double>(dataset_sizes[c]) /
                                                   static_cast<double>(smallest)));
  return out;
}

namespace {

NgmModel fit_ngm(EncodedMatrix x, const DependencyGraph& g, const ArchSpec& arch, const TrainConfig& cfg,
                 double structure_weight, std::uint64_t init_seed) {
  NgmModel m;
  m.kind = ModelKind::Ngm;
  m.graph = g;
  m.mask_complement = complement_mask(g, x.schema, false);
  const Mlp init = Mlp::random(arch.for_dim(x.dim()), init_seed, cfg.init_scale);
  m.mlp = train(init, x.values, ngm_objective(m.mask_complement, structure_weight, cfg.log_epsilon), cfg).model;
  m.schema = std::move(x.schema);
  m.stats = std::move(x.stats);
  record_training_stats(m, x.values);
  return m;
}

}  // namespace

NgmModel train_local_ngm(const Dataset& d, const DependencyGraph& g, const ArchSpec& arch, const TrainConfig& cfg) {
  for (const auto& n : g.nodes())
    if (!d.schema().find(n))
      throw SchemaError("graph node '" + n + "' is not a feature of dataset '" + d.name() + "'");
  return fit_ngm(encode_dataset(d.select_features(g.nodes())), g, arch, cfg, cfg.lambda,
                 derive_seed(cfg.seed, "init"));
}

NgmModel train_global_ngm(std::span<const EncodedMatrix> client_samples, const DependencyGraph& g,
                          const ArchSpec& arch, const TrainConfig& cfg, const std::optional<Dataset>& public_data,
                          Weighting weighting) {
  if (client_samples.empty()) throw ConfigError("train_global_ngm: no client samples");
  std::vector<FeatureSchema> schemas;
  for (const auto& s : client_samples) {
    for (const auto& n : g.nodes())
      if (!s.schema.find(n)) throw SchemaError("client samples lack global feature '" + n + "'");
    if (s.schema.size() != g.size()) throw SchemaError("client samples carry features outside the global graph");
    schemas.push_back(s.schema);
  }
  if (weighting == Weighting::Equal) {
    auto [lo, hi] = std::minmax_element(client_samples.begin(), client_samples.end(),
                                        [](const auto& a, const auto& b) { return a.rows() < b.rows(); });
    if (static_cast<double>(hi->rows()) > 1.1 * static_cast<double>(lo->rows()))
      throw ConfigError("equal weighting needs per-client sample counts within 10% of each other");
  }
  if (public_data) schemas.push_back(public_data->schema().select(g.nodes()));
  const FeatureSchema schema = union_schema(schemas, g.nodes());
  EncodedMatrix pool = pool_encoded(client_samples, schema);
  if (public_data) {
    const EncodedMatrix pub = encode_with(public_data->select_features(g.nodes()), schema, pool.stats);
    Eigen::MatrixXd both(pool.values.rows() + pub.values.rows(), pool.values.cols());
    both << pool.values, pub.values;
    pool.values = std::move(both);
  }
  return fit_ngm(std::move(pool), g, arch, cfg, cfg.gamma_global, derive_seed(cfg.seed, "init"));
}

}  // namespace fedngm
