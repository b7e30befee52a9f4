#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedngm/graph.hpp"
#include "fedngm/schema.hpp"

namespace fedngm {

struct SynthResult {
  Dataset data;
  DependencyGraph graph;
  Eigen::MatrixXd precision;
};

/// Feature names "x0".."x{n-1}", zero-padded so lexicographic order equals index order.
std::vector<std::string> synth_feature_names(std::size_t n);

/// Tridiagonal precision with unit diagonal and `coupling` on the first off-diagonals.
Eigen::MatrixXd chain_precision(std::size_t n, double coupling = 0.4);

/// Draws `n_samples` rows from N(0, precision^-1). Throws NumericError if the precision is
/// not positive definite.
SynthResult synth_from_precision(const Eigen::MatrixXd& precision, std::size_t n_samples,
                                 std::uint64_t seed, std::string name = "synth");

/// Random sparse Gaussian graphical model: round(density * n(n-1)/2) edges chosen uniformly,
/// off-diagonal magnitudes in [0.2, 0.4] with random signs, shrunk where needed so every row
/// stays strictly diagonally dominant against the unit diagonal.
SynthResult synth_ggm(std::size_t n_features, double edge_density, std::size_t n_samples,
                      std::uint64_t seed);

/// Row predicate for biased splits: categorical membership or a continuous half-open interval.
struct SplitPredicate {
  std::string feature;
  std::vector<std::string> values;  // categorical features
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();  // continuous: lo <= x < hi
  double target_fraction = 0.5;

  bool matches(const Dataset& d, std::size_t row) const;
};

struct SplitOptions {
  double public_fraction = 0.2;
  /// Rows per client; 0 means the client's full share of the non-public rows.
  std::size_t client_size = 0;
};

struct SplitResult {
  std::vector<Dataset> clients;
  Dataset public_data;
};

/// Client c receives a subset in which exactly round(target_fraction * size) rows match
/// predicate c (resampling with replacement when its share lacks enough rows of either kind).
/// A uniformly drawn public hold-out is set aside first. `predicates.size()` must equal
/// `n_clients`.
SplitResult biased_split(const Dataset& d, const std::vector<SplitPredicate>& predicates,
                         std::size_t n_clients, std::uint64_t seed, const SplitOptions& opts = {});

}  // namespace fedngm
