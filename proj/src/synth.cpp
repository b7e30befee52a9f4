#include "fedngm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

std::vector<std::string> synth_feature_names(std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string idx = std::to_string(i);
    names.push_back("x" + std::string(width - idx.size(), '0') + idx);
  }
  return names;
}

Eigen::MatrixXd chain_precision(std::size_t n, double coupling) {
  const auto d = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(d, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) theta(i, i + 1) = theta(i + 1, i) = coupling;
  return theta;
}

SynthResult synth_from_precision(const Eigen::MatrixXd& precision, std::size_t n_samples,
                                 std::uint64_t seed, std::string name) {
  const auto d = precision.rows();
  if (d < 2 || precision.cols() != d) throw ConfigError("precision must be square with n >= 2");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!precision.isApprox(precision.transpose(), 0.0)) throw ConfigError("precision is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericError("precision is not positive definite");
  // x = U^-1 z with precision = U^T U gives Cov(x) = precision^-1.
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(d, static_cast<Eigen::Index>(n_samples));
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    for (Eigen::Index r = 0; r < d; ++r) z(r, c) = normal(rng);
  const Eigen::MatrixXd x = llt.matrixU().solve(z).transpose();

  const auto names = synth_feature_names(static_cast<std::size_t>(d));
  std::vector<Feature> features;
  for (const auto& n : names) features.push_back(Feature::continuous(n));
  BoolMatrix adj = (precision.array() != 0.0);
  for (Eigen::Index i = 0; i < d; ++i) adj(i, i) = false;
  return {Dataset(std::move(name), FeatureSchema(std::move(features)), x),
          DependencyGraph(names, std::move(adj)), precision};
}

SynthResult synth_ggm(std::size_t n_features, double edge_density, std::size_t n_samples,
                      std::uint64_t seed) {
  if (n_features < 2) throw ConfigError("synth_ggm needs n_features >= 2");
  if (!(edge_density > 0 && edge_density <= 1)) throw ConfigError("edge_density must lie in (0,1]");
  const std::size_t pairs = n_features * (n_features - 1) / 2;
  const auto n_edges = static_cast<std::size_t>(std::llround(edge_density * static_cast<double>(pairs)));
  if (n_edges == 0) throw ConfigError("edge density yields zero edges");

  Rng rng(derive_seed(seed, "structure"));
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < n_features; ++i)
    for (std::size_t j = i + 1; j < n_features; ++j) all.emplace_back(i, j);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(n_edges);
  std::sort(all.begin(), all.end());

  const auto d = static_cast<Eigen::Index>(n_features);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(d, d);
  std::uniform_real_distribution<double> mag(0.2, 0.4);
  std::bernoulli_distribution flip(0.5);
  for (auto [i, j] : all) {
    const double v = mag(rng) * (flip(rng) ? -1.0 : 1.0);
    theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    theta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
  }
  const Eigen::VectorXd row_sum = theta.cwiseAbs().rowwise().sum().array() - 1.0;
  for (auto [i, j] : all) {
    const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
    const double worst = std::max(row_sum(a), row_sum(b));
    if (worst >= 0.95) {
      theta(a, b) *= 0.95 / worst;
      theta(b, a) = theta(a, b);
    }
  }
  return synth_from_precision(theta, n_samples, derive_seed(seed, "samples"), "ggm");
}

bool SplitPredicate::matches(const Dataset& d, std::size_t row) const {
  const std::size_t j = d.schema().index_of(feature);
  const double v = d.cells()(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
  if (d.schema()[j].is_categorical())
    return std::find(values.begin(), values.end(), d.label(row, j)) != values.end();
  return v >= lo && v < hi;
}

namespace {

// Draws `count` entries from `pool`: without replacement when it is large enough,
// otherwise the whole pool plus uniform draws with replacement.
std::vector<std::size_t> draw(const std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  if (count == 0) return out;
  if (pool.empty()) throw ConfigError("biased_split: cannot draw from an empty pool");
  std::vector<std::size_t> shuffled = pool;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::size_t take = std::min(count, shuffled.size());
  out.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(take));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  while (out.size() < count) out.push_back(pool[pick(rng)]);
  return out;
}

}  // namespace

SplitResult biased_split(const Dataset& d, const std::vector<SplitPredicate>& predicates,
                         std::size_t n_clients, std::uint64_t seed, const SplitOptions& opts) {
  if (n_clients < 1) throw ConfigError("biased_split needs at least one client");
  if (predicates.size() != n_clients)
    throw ConfigError("biased_split needs one predicate per client");
  if (!(opts.public_fraction > 0 && opts.public_fraction < 1))
    throw ConfigError("public_fraction must lie in (0,1)");
  for (const auto& p : predicates) {
    if (!(p.target_fraction > 0 && p.target_fraction < 1))
      throw ConfigError("target fraction for '" + p.feature + "' must lie in (0,1)");
    d.schema().index_of(p.feature);
    bool any = false;
    for (std::size_t r = 0; r < d.rows() && !any; ++r) any = p.matches(d, r);
    if (!any) throw ConfigError("predicate on '" + p.feature + "' matches zero rows");
  }

  Rng rng(derive_seed(seed, "biased_split"));
  std::vector<std::size_t> order(d.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_public = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(opts.public_fraction * static_cast<double>(d.rows()))));
  std::vector<std::size_t> pub(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_public));
  std::sort(pub.begin(), pub.end());
  const std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(n_public), order.end());
  const std::size_t share = rest.size() / n_clients;
  if (share == 0) throw ConfigError("too few rows for the requested number of clients");

  SplitResult out;
  for (std::size_t c = 0; c < n_clients; ++c) {
    const std::vector<std::size_t> pool(rest.begin() + static_cast<std::ptrdiff_t>(c * share),
                                        rest.begin() + static_cast<std::ptrdiff_t>((c + 1) * share));
    std::vector<std::size_t> hit, miss;
    for (std::size_t r : pool) (predicates[c].matches(d, r) ? hit : miss).push_back(r);
    // A share may lack matching rows entirely; fall back to the whole non-public pool.
    if (hit.empty())
      for (std::size_t r : rest) if (predicates[c].matches(d, r)) hit.push_back(r);
    if (miss.empty())
      for (std::size_t r : rest) if (!predicates[c].matches(d, r)) miss.push_back(r);
    const std::size_t size = opts.client_size ? opts.client_size : share;
    const auto n_hit = static_cast<std::size_t>(std::llround(predicates[c].target_fraction * static_cast<double>(size)));
    Rng crng(derive_seed(seed, "client" + std::to_string(c)));
    std::vector<std::size_t> rows = draw(hit, n_hit, crng);
    const auto rest_rows = draw(miss, size - n_hit, crng);
    rows.insert(rows.end(), rest_rows.begin(), rest_rows.end());
    std::shuffle(rows.begin(), rows.end(), crng);
    out.clients.push_back(d.select_rows(rows, "client" + std::to_string(c + 1)));
  }
  out.public_data = d.select_rows(pub, "public");
  return out;
}

}  // namespace fedngm
