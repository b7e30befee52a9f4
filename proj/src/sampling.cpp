#include "fedngm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

namespace {

Eigen::MatrixXd hidden_activation(const Mlp& m, const Eigen::MatrixXd& z) {
  switch (m.hidden) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: return z;
  }
  return z;
}

// Output columns [begin, begin+size) given the first-layer pre-activation z1 = x W_0 + b_0.
Eigen::MatrixXd output_block(const Mlp& m, const Eigen::MatrixXd& z1, Eigen::Index begin, Eigen::Index size) {
  const std::size_t depth = m.depth();
  if (depth == 1) return z1.middleCols(begin, size);
  Eigen::MatrixXd a = hidden_activation(m, z1);
  for (std::size_t l = 1; l + 1 < depth; ++l) {
    Eigen::MatrixXd z = a * m.weights[l];
    z.rowwise() += m.biases[l].transpose();
    a = hidden_activation(m, z);
  }
  Eigen::MatrixXd out = a * m.weights[depth - 1].middleCols(begin, size);
  out.rowwise() += m.biases[depth - 1].segment(begin, size).transpose();
  return out;
}

Eigen::MatrixXd first_layer(const Mlp& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * m.weights[0];
  z.rowwise() += m.biases[0].transpose();
  return z;
}

}  // namespace

EncodedMatrix sample(const GraphicalModel& m, std::size_t n, std::uint64_t seed, const SamplerConfig& cfg) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  if (!m.trained()) throw ConfigError("sample: model has no recorded residuals (untrained)");
  const FeatureSchema& s = m.schema;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto d = static_cast<Eigen::Index>(s.encoded_dim());
  Rng rng(derive_seed(seed, "sampler"));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, d);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const UnitRange r = s.range(j);
    const auto u = static_cast<Eigen::Index>(r.begin);
    if (s[j].is_categorical()) {
      std::uniform_int_distribution<Eigen::Index> pick(0, static_cast<Eigen::Index>(r.size) - 1);
      for (Eigen::Index i = 0; i < rows; ++i) x(i, u + pick(rng)) = 1.0;
    } else {
      for (Eigen::Index i = 0; i < rows; ++i) x(i, u) = normal(rng);
    }
  }

  // z1 tracks x * W_0 + b_0 and is updated incrementally as blocks of x change.
  Eigen::MatrixXd z1 = first_layer(m.mlp, x);
  const Eigen::MatrixXd& w0 = m.mlp.weights[0];
  for (std::size_t sweep = 0; sweep < cfg.burn_in_sweeps; ++sweep) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      const UnitRange r = s.range(j);
      const auto u = static_cast<Eigen::Index>(r.begin);
      const auto w = static_cast<Eigen::Index>(r.size);
      const Eigen::MatrixXd out = output_block(m.mlp, z1, u, w);
      Eigen::MatrixXd next(rows, w);
      if (s[j].is_categorical()) {
        next.setZero();
        for (Eigen::Index i = 0; i < rows; ++i) {
          Eigen::VectorXd p = out.row(i).transpose();
          if (cfg.projection == CategoricalProjection::Softmax) {
            p = (p.array() - p.maxCoeff()).exp();
          } else {
            p = p.cwiseMax(0.0);
            if (!(p.sum() > 0)) p.setOnes();
          }
          double target = uniform(rng) * p.sum();
          Eigen::Index k = 0;
          for (; k + 1 < w; ++k) {
            target -= p(k);
            if (target < 0) break;
          }
          next(i, k) = 1.0;
        }
      } else {
        const double sd = m.residual_std(u);
        for (Eigen::Index i = 0; i < rows; ++i) next(i, 0) = out(i, 0) + sd * normal(rng);
      }
      z1.noalias() += (next - x.middleCols(u, w)) * w0.middleRows(u, w);
      x.middleCols(u, w) = next;
    }
  }
  return {std::move(x), m.schema, m.stats};
}

namespace {

// Fixed-point iteration on rows of x with the columns flagged in `clamped` held fixed.
BatchInference iterate(const Mlp& mlp, Eigen::MatrixXd x, const std::vector<bool>& clamped, const InferenceConfig& cfg) {
  BatchInference out;
  const auto d = x.cols();
  bool any_free = false;
  for (bool c : clamped) any_free = any_free || !c;
  if (!any_free) {
    out.encoded = std::move(x);
    out.converged = true;
    return out;
  }
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const Eigen::MatrixXd y = forward(mlp, x);
    double change = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      if (clamped[static_cast<std::size_t>(c)]) continue;
      change = std::max(change, (y.col(c) - x.col(c)).cwiseAbs().maxCoeff());
      x.col(c) = y.col(c);
    }
    out.iterations = it + 1;
    if (!x.allFinite()) throw NumericError("conditional inference diverged");
    if (change < cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.encoded = std::move(x);
  return out;
}

}  // namespace

BatchInference infer_batch(const GraphicalModel& m, const Dataset& data, const std::vector<std::string>& observed,
                           const InferenceConfig& cfg) {
  const FeatureSchema& s = m.schema;
  const auto rows = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd x = m.unit_mean.transpose().replicate(rows, 1);
  std::vector<bool> clamped(s.encoded_dim(), false);
  if (!observed.empty()) {
    const FeatureSchema sub = s.select(observed);
    ColumnStats sub_stats = ColumnStats::identity(sub.encoded_dim());
    for (std::size_t k = 0; k < observed.size(); ++k) {
      const UnitRange src = s.range(s.index_of(observed[k]));
      const UnitRange dst = sub.range(k);
      sub_stats.mean.segment(static_cast<Eigen::Index>(dst.begin), static_cast<Eigen::Index>(dst.size)) =
          m.stats.mean.segment(static_cast<Eigen::Index>(src.begin), static_cast<Eigen::Index>(src.size));
      sub_stats.std.segment(static_cast<Eigen::Index>(dst.begin), static_cast<Eigen::Index>(dst.size)) =
          m.stats.std.segment(static_cast<Eigen::Index>(src.begin), static_cast<Eigen::Index>(src.size));
    }
    const EncodedMatrix enc = encode_with(data.select_features(observed), sub, sub_stats);
    for (std::size_t k = 0; k < observed.size(); ++k) {
      const UnitRange src = s.range(s.index_of(observed[k]));
      const UnitRange dst = sub.range(k);
      x.middleCols(static_cast<Eigen::Index>(src.begin), static_cast<Eigen::Index>(src.size)) =
          enc.values.middleCols(static_cast<Eigen::Index>(dst.begin), static_cast<Eigen::Index>(dst.size));
      for (std::size_t u = src.begin; u < src.end(); ++u) clamped[u] = true;
    }
  }
  return iterate(m.mlp, std::move(x), clamped, cfg);
}

Eigen::MatrixXd predict_feature(const GraphicalModel& m, const Dataset& data, const std::string& feature,
                                const InferenceConfig& cfg) {
  const std::size_t j = m.schema.index_of(feature);
  std::vector<std::string> observed;
  for (const auto& n : m.schema.names())
    if (n != feature) observed.push_back(n);
  const BatchInference res = infer_batch(m, data, observed, cfg);
  const UnitRange r = m.schema.range(j);
  const auto u = static_cast<Eigen::Index>(r.begin);
  Eigen::MatrixXd block = res.encoded.middleCols(u, static_cast<Eigen::Index>(r.size));
  if (!m.schema[j].is_categorical()) block = (block.array() * m.stats.std(u) + m.stats.mean(u)).matrix();
  return block;
}

InferenceResult conditional_infer(const GraphicalModel& m, const std::map<std::string, CellValue>& observed,
                                  const std::vector<std::string>& targets, const InferenceConfig& cfg) {
  const FeatureSchema& s = m.schema;
  for (const auto& t : targets) {
    s.index_of(t);
    if (observed.contains(t)) throw ConfigError("feature '" + t + "' is both observed and a target");
  }
  Eigen::VectorXd x = m.unit_mean;
  std::vector<bool> clamped(s.encoded_dim(), false);
  for (const auto& [name, value] : observed) {
    const std::size_t j = s.index_of(name);
    const UnitRange r = s.range(j);
    const auto u = static_cast<Eigen::Index>(r.begin);
    if (s[j].is_categorical()) {
      const auto* label = std::get_if<std::string>(&value);
      if (!label) throw SchemaError("feature '" + name + "' is categorical; observed value must be a label");
      const auto idx = s[j].value_index(*label);
      if (!idx) throw SchemaError("unseen value '" + *label + "' for feature '" + name + "'");
      x.segment(u, static_cast<Eigen::Index>(r.size)).setZero();
      x(u + static_cast<Eigen::Index>(*idx)) = 1.0;
    } else {
      const auto* v = std::get_if<double>(&value);
      if (!v) throw SchemaError("feature '" + name + "' is continuous; observed value must be numeric");
      x(u) = (*v - m.stats.mean(u)) / m.stats.std(u);
    }
    for (std::size_t k = r.begin; k < r.end(); ++k) clamped[k] = true;
  }
  const BatchInference b = iterate(m.mlp, Eigen::MatrixXd(x.transpose()), clamped, cfg);

  InferenceResult out;
  out.encoded = b.encoded.row(0).transpose();
  out.iterations = b.iterations;
  out.converged = b.converged;
  for (const auto& t : targets) {
    const std::size_t j = s.index_of(t);
    const UnitRange r = s.range(j);
    const auto u = static_cast<Eigen::Index>(r.begin);
    TargetPrediction p;
    if (s[j].is_categorical()) {
      const Eigen::VectorXd block = out.encoded.segment(u, static_cast<Eigen::Index>(r.size));
      p.scores.assign(block.data(), block.data() + block.size());
      Eigen::Index best = 0;
      block.maxCoeff(&best);
      p.value = s[j].values[static_cast<std::size_t>(best)];
    } else {
      p.value = out.encoded(u) * m.stats.std(u) + m.stats.mean(u);
    }
    out.targets.emplace(t, std::move(p));
  }
  return out;
}

}  // namespace fedngm
