#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedngm/schema.hpp"

namespace fedngm {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Undirected feature-level dependency graph: symmetric adjacency with empty diagonal.
class DependencyGraph {
 public:
  DependencyGraph() = default;
  /// Throws ConfigError when names repeat or the adjacency is not symmetric/zero-diagonal.
  DependencyGraph(std::vector<std::string> nodes, BoolMatrix adjacency);
  static DependencyGraph empty(std::vector<std::string> nodes);
  static DependencyGraph complete(std::vector<std::string> nodes);
  static DependencyGraph from_edges(std::vector<std::string> nodes,
                                    std::span<const std::pair<std::string, std::string>> edges);

  const std::vector<std::string>& nodes() const { return nodes_; }
  const BoolMatrix& adjacency() const { return adj_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool has_node(const std::string& name) const;
  bool has_edge(std::size_t i, std::size_t j) const { return adj_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  bool has_edge(const std::string& a, const std::string& b) const;
  std::size_t edge_count() const;
  /// Edges as (name, name) pairs with i < j in node order.
  std::vector<std::pair<std::string, std::string>> edges() const;

  /// Same graph over a subset of nodes, in the given order.
  DependencyGraph restrict_to(std::span<const std::string> names) const;

  bool operator==(const DependencyGraph& o) const {
    return nodes_ == o.nodes_ && adj_.rows() == o.adj_.rows() && (adj_ == o.adj_).all();
  }

 private:
  std::vector<std::string> nodes_;
  BoolMatrix adj_;
};

/// D x D 0/1 matrix in encoded-unit space, block-constant over feature pairs.
struct UnitMask {
  Eigen::MatrixXd values;
};

/// Master-side merge: nodes are the intersection of all node sets (sorted lexicographically),
/// an edge is kept when any input graph has it. Throws ProtocolError on an empty intersection.
DependencyGraph merge_graphs(std::span<const DependencyGraph> graphs);

/// Expands a feature-level matrix to unit level by block replication over `schema`.
Eigen::MatrixXd expand_to_units(const Eigen::MatrixXd& feature_level, const FeatureSchema& schema);

/// Unit-level adjacency of `g` under `schema` (graph nodes must equal schema features).
Eigen::MatrixXd expand_adjacency(const DependencyGraph& g, const FeatureSchema& schema);

/// Complement of the graph's adjacency (1 where no edge) expanded to units. With
/// include_self the diagonal feature blocks are 0 (self-dependence allowed); without it they
/// are 1 and penalized like any other missing edge.
UnitMask complement_mask(const DependencyGraph& g, const FeatureSchema& schema, bool include_self);

/// Unit-level mask of the diagonal feature blocks (within-feature unit pairs).
UnitMask diagonal_block_mask(const FeatureSchema& schema);

/// Max |value| over each off-diagonal feature block; diagonal blocks are 0.
Eigen::MatrixXd pool_feature_blocks(const Eigen::MatrixXd& unit_level, const FeatureSchema& schema);

/// Partial correlations from the ridge-regularized inverse sample covariance. Throws
/// NumericError if the regularized covariance is not positive definite.
Eigen::MatrixXd partial_correlations(const Eigen::MatrixXd& x, double ridge);

/// Baseline structure recovery: edge iff the block-max |partial correlation| exceeds threshold.
DependencyGraph recover_graph_precision(const EncodedMatrix& x, double ridge, double threshold);

/// (S + S^T)/2.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& s);

/// Thresholds the symmetrized, block-max-pooled path matrix: edge iff score > tau.
DependencyGraph graph_from_path_matrix(const Eigen::MatrixXd& s_nn, const FeatureSchema& schema, double tau);

/// Precision/recall/F1 of `learned` edges against `truth` (same node set).
struct EdgeScore {
  std::size_t true_positive = 0, false_positive = 0, false_negative = 0;
  double precision() const;
  double recall() const;
  double f1() const;
};
EdgeScore compare_edges(const DependencyGraph& truth, const DependencyGraph& learned);

/// Versioned JSON document with node names and adjacency lists.
std::string graph_to_json(const DependencyGraph& g);
DependencyGraph graph_from_json(const std::string& text);

}  // namespace fedngm
