#include "fedngm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedngm/error.hpp"
#include "fedngm/log.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

ParamMask ParamMask::none(const MlpArchitecture& arch) {
  ParamMask m;
  for (std::size_t l = 0; l + 1 < arch.layer_dims.size(); ++l) {
    m.weights.push_back(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
        static_cast<Eigen::Index>(arch.layer_dims[l]), static_cast<Eigen::Index>(arch.layer_dims[l + 1]), false));
    m.biases.push_back(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(
        static_cast<Eigen::Index>(arch.layer_dims[l + 1]), false));
  }
  return m;
}

ParamMask ParamMask::all(const MlpArchitecture& arch) {
  ParamMask m = none(arch);
  for (auto& w : m.weights) w.setConstant(true);
  for (auto& b : m.biases) b.setConstant(true);
  return m;
}

std::size_t ParamMask::count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.count());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.count());
  return n;
}

bool ParamMask::covers_everything() const {
  for (const auto& w : weights) if (!w.all()) return false;
  for (const auto& b : biases) if (!b.all()) return false;
  return true;
}

std::vector<std::size_t> canonical_row_order(const Eigen::MatrixXd& x) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double va = x(static_cast<Eigen::Index>(a), c), vb = x(static_cast<Eigen::Index>(b), c);
      if (va != vb) return va < vb;
    }
    return false;
  });
  return idx;
}

namespace {

struct Adam {
  Mlp m1, m2;
  std::size_t t = 0;
};

template <typename Param, typename Frozen>
void adam_step(Param& w, const Param& g, Param& m1, Param& m2, const Frozen* frozen, const TrainConfig& cfg,
               double bc1, double bc2) {
  m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * g;
  m2 = cfg.adam_beta2 * m2 + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
  Param step = (cfg.learning_rate * (m1 / bc1).array() /
                ((m2 / bc2).array().sqrt() + cfg.adam_epsilon)).matrix();
  if (frozen) step = frozen->select(Param::Zero(step.rows(), step.cols()), step.array()).matrix();
  w -= step;
}

}  // namespace

TrainResult freeze_mask_train(const Mlp& init, const ParamMask& frozen, const Eigen::MatrixXd& x,
                              const Objective& obj, const TrainConfig& cfg) {
  cfg.validate();
  if (x.rows() < 1) throw ConfigError("training data is empty");
  const bool any_frozen = frozen.count() > 0;
  if (any_frozen && frozen.covers_everything()) {
    log_warning("freeze_mask_train: every parameter is frozen; returning the input model");
    return {init, {}};
  }
  if (any_frozen && frozen.weights.size() != init.depth())
    throw ConfigError("freeze mask depth does not match the model");

  const auto order = canonical_row_order(x);
  Eigen::MatrixXd data(x.rows(), x.cols());
  for (std::size_t i = 0; i < order.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[i]));

  const std::size_t rows = static_cast<std::size_t>(data.rows());
  const std::size_t batch = std::min(cfg.batch_size, rows);
  Rng rng(derive_seed(cfg.seed, "minibatch-order"));
  std::vector<std::size_t> perm(rows);
  std::iota(perm.begin(), perm.end(), 0);

  Objective scaled = obj;
  if (cfg.penalty_per_row)
    for (auto& p : scaled.penalties) p.weight *= static_cast<double>(rows);

  Mlp model = init;
  Adam adam{Mlp::zeros(model.architecture()), Mlp::zeros(model.architecture())};
  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  Eigen::MatrixXd xb;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double recon = 0.0;
    for (std::size_t start = 0; start < rows; start += batch) {
      const std::size_t n = std::min(batch, rows - start);
      xb.resize(static_cast<Eigen::Index>(n), data.cols());
      for (std::size_t i = 0; i < n; ++i) xb.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(perm[start + i]));
      const double scale = static_cast<double>(rows) / static_cast<double>(n);
      LossAndGradient lg = objective_gradient(model, xb, scaled, scale);
      recon += lg.loss.reconstruction;
      ++adam.t;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.t));
      for (std::size_t l = 0; l < model.depth(); ++l) {
        adam_step(model.weights[l], lg.gradient.weights[l], adam.m1.weights[l], adam.m2.weights[l],
                  any_frozen ? &frozen.weights[l] : nullptr, cfg, bc1, bc2);
        adam_step(model.biases[l], lg.gradient.biases[l], adam.m1.biases[l], adam.m2.biases[l],
                  any_frozen ? &frozen.biases[l] : nullptr, cfg, bc1, bc2);
      }
    }
    const Eigen::MatrixXd s = path_matrix(model);
    double total = recon;
    for (const auto& p : scaled.penalties) total += p.value(s);
    if (!std::isfinite(total) || !model.all_finite())
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    result.loss_history.push_back(total);
  }
  result.model = std::move(model);
  return result;
}

TrainResult train(const Mlp& init, const Eigen::MatrixXd& x, const Objective& obj, const TrainConfig& cfg) {
  return freeze_mask_train(init, ParamMask{}, x, obj, cfg);
}

TrainResult train(ModelKind kind, const Mlp& init, const EncodedMatrix& x, const UnitMask* complement,
                  const TrainConfig& cfg) {
  if (kind == ModelKind::Ngm) {
    if (!complement) throw ConfigError("NGM training needs a complement mask");
    return train(init, x.values, ngm_objective(*complement, cfg.lambda, cfg.log_epsilon), cfg);
  }
  return train(init, x.values, ngr_objective(x.schema, cfg), cfg);
}

}  // namespace fedngm
