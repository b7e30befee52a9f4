#include "fedngm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "fedngm/error.hpp"

namespace fedngm {

DependencyGraph::DependencyGraph(std::vector<std::string> nodes, BoolMatrix adjacency)
    : nodes_(std::move(nodes)), adj_(std::move(adjacency)) {
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  if (adj_.rows() != n || adj_.cols() != n)
    throw ConfigError("graph adjacency shape does not match node count");
  std::unordered_set<std::string> seen(nodes_.begin(), nodes_.end());
  if (seen.size() != nodes_.size()) throw ConfigError("graph has duplicate node names");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adj_(i, i)) throw ConfigError("graph has a self loop at '" + nodes_[static_cast<std::size_t>(i)] + "'");
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (adj_(i, j) != adj_(j, i)) throw ConfigError("graph adjacency is not symmetric");
  }
}

DependencyGraph DependencyGraph::empty(std::vector<std::string> nodes) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  return DependencyGraph(std::move(nodes), BoolMatrix::Constant(n, n, false));
}

DependencyGraph DependencyGraph::complete(std::vector<std::string> nodes) {
  const auto n = static_cast<Eigen::Index>(nodes.size());
  BoolMatrix a = BoolMatrix::Constant(n, n, true);
  a.matrix().diagonal().setConstant(false);
  return DependencyGraph(std::move(nodes), std::move(a));
}

DependencyGraph DependencyGraph::from_edges(std::vector<std::string> nodes,
                                            std::span<const std::pair<std::string, std::string>> edges) {
  DependencyGraph g = empty(std::move(nodes));
  for (const auto& [a, b] : edges) {
    const auto i = static_cast<Eigen::Index>(g.index_of(a));
    const auto j = static_cast<Eigen::Index>(g.index_of(b));
    if (i == j) throw ConfigError("self loop on '" + a + "'");
    g.adj_(i, j) = g.adj_(j, i) = true;
  }
  return g;
}

std::size_t DependencyGraph::index_of(const std::string& name) const {
  auto it = std::find(nodes_.begin(), nodes_.end(), name);
  if (it == nodes_.end()) throw ConfigError("graph has no node '" + name + "'");
  return static_cast<std::size_t>(it - nodes_.begin());
}

bool DependencyGraph::has_node(const std::string& name) const {
  return std::find(nodes_.begin(), nodes_.end(), name) != nodes_.end();
}

bool DependencyGraph::has_edge(const std::string& a, const std::string& b) const {
  return has_edge(index_of(a), index_of(b));
}

std::size_t DependencyGraph::edge_count() const {
  return static_cast<std::size_t>(adj_.count()) / 2;
}

std::vector<std::pair<std::string, std::string>> DependencyGraph::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    for (std::size_t j = i + 1; j < nodes_.size(); ++j)
      if (has_edge(i, j)) out.emplace_back(nodes_[i], nodes_[j]);
  return out;
}

DependencyGraph DependencyGraph::restrict_to(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(index_of(n));
  const auto k = static_cast<Eigen::Index>(names.size());
  BoolMatrix a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = adj_(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                     static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
  return DependencyGraph({names.begin(), names.end()}, std::move(a));
}

DependencyGraph merge_graphs(std::span<const DependencyGraph> graphs) {
  if (graphs.empty()) throw ConfigError("merge_graphs: no graphs");
  std::set<std::string> common(graphs.front().nodes().begin(), graphs.front().nodes().end());
  for (const auto& g : graphs.subspan(1)) {
    std::set<std::string> next;
    for (const auto& n : g.nodes())
      if (common.contains(n)) next.insert(n);
    common = std::move(next);
  }
  if (common.empty()) throw ProtocolError("no common features across client graphs");
  std::vector<std::string> nodes(common.begin(), common.end());
  const auto n = static_cast<Eigen::Index>(nodes.size());
  BoolMatrix adj = BoolMatrix::Constant(n, n, false);
  for (const auto& g : graphs) adj = adj || g.restrict_to(nodes).adjacency();
  return DependencyGraph(std::move(nodes), std::move(adj));
}

Eigen::MatrixXd expand_to_units(const Eigen::MatrixXd& feature_level, const FeatureSchema& schema) {
  const auto d = static_cast<Eigen::Index>(schema.encoded_dim());
  Eigen::MatrixXd out(d, d);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const UnitRange ri = schema.range(i);
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const UnitRange rj = schema.range(j);
      out.block(static_cast<Eigen::Index>(ri.begin), static_cast<Eigen::Index>(rj.begin),
                static_cast<Eigen::Index>(ri.size), static_cast<Eigen::Index>(rj.size))
          .setConstant(feature_level(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

namespace {

// Adjacency permuted into schema feature order.
Eigen::MatrixXd adjacency_in_schema_order(const DependencyGraph& g, const FeatureSchema& schema) {
  if (g.size() != schema.size())
    throw ConfigError("graph has " + std::to_string(g.size()) + " nodes but schema has " +
                      std::to_string(schema.size()) + " features");
  const auto n = static_cast<Eigen::Index>(schema.size());
  std::vector<std::size_t> map(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) map[i] = g.index_of(schema[i].name);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = g.has_edge(map[static_cast<std::size_t>(i)], map[static_cast<std::size_t>(j)]) ? 1.0 : 0.0;
  return a;
}

}  // namespace

Eigen::MatrixXd expand_adjacency(const DependencyGraph& g, const FeatureSchema& schema) {
  return expand_to_units(adjacency_in_schema_order(g, schema), schema);
}

UnitMask complement_mask(const DependencyGraph& g, const FeatureSchema& schema, bool include_self) {
  Eigen::MatrixXd comp = (1.0 - adjacency_in_schema_order(g, schema).array()).matrix();
  comp.diagonal().setConstant(include_self ? 0.0 : 1.0);
  return {expand_to_units(comp, schema)};
}

UnitMask diagonal_block_mask(const FeatureSchema& schema) {
  const auto n = static_cast<Eigen::Index>(schema.size());
  return {expand_to_units(Eigen::MatrixXd::Identity(n, n), schema)};
}

Eigen::MatrixXd pool_feature_blocks(const Eigen::MatrixXd& unit_level, const FeatureSchema& schema) {
  const auto n = static_cast<Eigen::Index>(schema.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const UnitRange ri = schema.range(i);
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (i == j) continue;
      const UnitRange rj = schema.range(j);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          unit_level
              .block(static_cast<Eigen::Index>(ri.begin), static_cast<Eigen::Index>(rj.begin),
                     static_cast<Eigen::Index>(ri.size), static_cast<Eigen::Index>(rj.size))
              .cwiseAbs()
              .maxCoeff();
    }
  }
  return out;
}

Eigen::MatrixXd partial_correlations(const Eigen::MatrixXd& x, double ridge) {
  if (!(ridge > 0)) throw ConfigError("ridge must be positive");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows());
  cov.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance not invertible even after ridge");
  const Eigen::MatrixXd theta = llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  if (!theta.allFinite()) throw NumericError("precision matrix is not finite");
  const Eigen::VectorXd inv_sqrt = theta.diagonal().array().rsqrt();
  Eigen::MatrixXd rho = -(inv_sqrt.asDiagonal() * theta * inv_sqrt.asDiagonal());
  rho.diagonal().setOnes();
  return rho;
}

DependencyGraph recover_graph_precision(const EncodedMatrix& x, double ridge, double threshold) {
  const Eigen::MatrixXd score = pool_feature_blocks(partial_correlations(x.values, ridge), x.schema);
  const auto n = score.rows();
  BoolMatrix adj = (score.array() > threshold);
  for (Eigen::Index i = 0; i < n; ++i) adj(i, i) = false;
  return DependencyGraph(x.schema.names(), std::move(adj));
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& s) { return (s + s.transpose()) / 2.0; }

DependencyGraph graph_from_path_matrix(const Eigen::MatrixXd& s_nn, const FeatureSchema& schema, double tau) {
  const auto d = static_cast<Eigen::Index>(schema.encoded_dim());
  if (s_nn.rows() != d || s_nn.cols() != d) throw ConfigError("path matrix does not match schema dimension");
  const Eigen::MatrixXd score = pool_feature_blocks(symmetrize(s_nn), schema);
  BoolMatrix adj = (score.array() > tau);
  for (Eigen::Index i = 0; i < adj.rows(); ++i) adj(i, i) = false;
  return DependencyGraph(schema.names(), std::move(adj));
}

double EdgeScore::precision() const {
  const auto p = true_positive + false_positive;
  return p ? static_cast<double>(true_positive) / static_cast<double>(p) : 0.0;
}
double EdgeScore::recall() const {
  const auto p = true_positive + false_negative;
  return p ? static_cast<double>(true_positive) / static_cast<double>(p) : 0.0;
}
double EdgeScore::f1() const {
  const double denom = static_cast<double>(2 * true_positive + false_positive + false_negative);
  return denom > 0 ? 2.0 * static_cast<double>(true_positive) / denom : 1.0;
}

EdgeScore compare_edges(const DependencyGraph& truth, const DependencyGraph& learned) {
  const DependencyGraph l = learned.restrict_to(truth.nodes());
  EdgeScore s;
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      const bool t = truth.has_edge(i, j), p = l.has_edge(i, j);
      s.true_positive += t && p;
      s.false_positive += !t && p;
      s.false_negative += t && !p;
    }
  return s;
}

std::string graph_to_json(const DependencyGraph& g) {
  nlohmann::ordered_json doc;
  doc["format"] = "fedngm.graph";
  doc["version"] = 1;
  doc["nodes"] = g.nodes();
  nlohmann::ordered_json adj = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::vector<std::string> nbrs;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (g.has_edge(i, j)) nbrs.push_back(g.nodes()[j]);
    adj[g.nodes()[i]] = nbrs;
  }
  doc["adjacency"] = std::move(adj);
  return doc.dump(2);
}

DependencyGraph graph_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format") != "fedngm.graph") throw ConfigError("not a graph document");
    if (doc.at("version").get<int>() != 1)
      throw ConfigError("unsupported graph document version " + doc.at("version").dump());
    auto nodes = doc.at("nodes").get<std::vector<std::string>>();
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& [name, nbrs] : doc.at("adjacency").items())
      for (const auto& other : nbrs) edges.emplace_back(name, other.get<std::string>());
    DependencyGraph g = DependencyGraph::from_edges(std::move(nodes), edges);
    // Adjacency lists must list both directions.
    std::size_t listed = 0;
    for (const auto& [name, nbrs] : doc.at("adjacency").items()) listed += nbrs.size();
    if (listed != 2 * g.edge_count()) throw ConfigError("adjacency lists are not symmetric");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed graph document: ") + e.what());
  }
}

}  // namespace fedngm
