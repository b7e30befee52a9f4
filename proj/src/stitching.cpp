#include "fedngm/stitching.hpp"

#include <cmath>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

DependencyGraph structure_of(const AnyModel& m) {
  if (const auto* ngm = std::get_if<NgmModel>(&m)) return ngm->graph;
  const auto& ngr = std::get<NgrModel>(m);
  if (ngr.extracted_graph) return *ngr.extracted_graph;
  return DependencyGraph::complete(ngr.schema.names());
}

}  // namespace

StitchedModel stitch_architecture(const AnyModel& global_any, const FeatureSchema& client_schema,
                                  const std::optional<DependencyGraph>& client_graph, const StitchOptions& opts) {
  const GraphicalModel& global = base_of(global_any);
  std::vector<Feature> features = global.schema.features();
  for (const auto& f : global.schema.features())
    if (!client_schema.find(f.name)) throw SchemaError("client schema is missing global feature '" + f.name + "'");
  for (const auto& f : client_schema.features())
    if (!global.schema.find(f.name)) features.push_back(f);

  StitchedModel out;
  out.kind = global.kind;
  out.schema = FeatureSchema(std::move(features));
  out.global_dim = global.schema.encoded_dim();
  out.global_stats = global.stats;
  out.global_hash = content_hash(serialize_model(global_any));

  const MlpArchitecture old_arch = global.mlp.architecture();
  MlpArchitecture arch = old_arch;
  arch.layer_dims.front() = arch.layer_dims.back() = out.schema.encoded_dim();
  for (std::size_t l = 1; l + 1 < arch.layer_dims.size(); ++l)
    arch.layer_dims[l] += opts.extra_hidden_per_layer
                              ? *opts.extra_hidden_per_layer
                              : static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(old_arch.layer_dims[l])));

  out.mlp = opts.init == NewWeightInit::Zero ? Mlp::zeros(arch)
                                             : Mlp::random(arch, derive_seed(opts.seed, "stitch"), opts.init_scale);
  out.frozen = ParamMask::none(arch);
  for (std::size_t l = 0; l < global.mlp.depth(); ++l) {
    const auto& w = global.mlp.weights[l];
    const auto& b = global.mlp.biases[l];
    out.mlp.weights[l].topLeftCorner(w.rows(), w.cols()) = w;
    out.frozen.weights[l].topLeftCorner(w.rows(), w.cols()).setConstant(true);
    out.mlp.biases[l].head(b.size()) = b;
    out.frozen.biases[l].head(b.size()).setConstant(true);
  }

  // Global edges among global features; client edges wherever a new feature is involved.
  const std::vector<std::string> names = out.schema.names();
  const DependencyGraph global_graph = structure_of(global_any);
  const std::size_t n_old = global.schema.size();
  BoolMatrix adj = BoolMatrix::Constant(idx(names.size()), idx(names.size()), false);
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (i == j) continue;
      if (i < n_old && j < n_old) adj(idx(i), idx(j)) = global_graph.has_edge(names[i], names[j]);
      else if (client_graph) adj(idx(i), idx(j)) = client_graph->has_edge(names[i], names[j]);
      else adj(idx(i), idx(j)) = true;
    }
  out.graph = DependencyGraph(names, std::move(adj));
  out.mask_complement = complement_mask(out.graph, out.schema, false);
  return out;
}

EncodedMatrix encode_for_stitched(const StitchedModel& stitched, const Dataset& client_data) {
  const Dataset d = client_data.select_features(stitched.schema.names()).conform_to(stitched.schema);
  ColumnStats stats = ColumnStats::identity(stitched.schema.encoded_dim());
  const auto g = idx(stitched.global_dim);
  stats.mean.head(g) = stitched.global_stats.mean;
  stats.std.head(g) = stitched.global_stats.std;
  const ColumnStats client_stats = fit_stats(d);
  stats.mean.tail(stats.mean.size() - g) = client_stats.mean.tail(stats.mean.size() - g);
  stats.std.tail(stats.std.size() - g) = client_stats.std.tail(stats.std.size() - g);
  return encode_with(d, stitched.schema, stats);
}

AnyModel train_personalized(const StitchedModel& stitched, const Dataset& client_data, const TrainConfig& cfg) {
  EncodedMatrix x = encode_for_stitched(stitched, client_data);
  const Objective obj = stitched.kind == ModelKind::Ngm
                            ? ngm_objective(stitched.mask_complement, cfg.lambda, cfg.log_epsilon)
                            : ngr_objective(stitched.schema, cfg);
  Mlp trained = freeze_mask_train(stitched.mlp, stitched.frozen, x.values, obj, cfg).model;

  auto fill = [&](GraphicalModel& m) {
    m.kind = stitched.kind;
    m.mlp = std::move(trained);
    m.schema = stitched.schema;
    m.stats = x.stats;
    m.provenance = stitched.global_hash;
    record_training_stats(m, x.values);
  };
  if (stitched.kind == ModelKind::Ngm) {
    NgmModel m;
    fill(m);
    m.graph = stitched.graph;
    m.mask_complement = stitched.mask_complement;
    return m;
  }
  NgrModel m;
  fill(m);
  return m;
}

}  // namespace fedngm
