#include "fedngm/objective.hpp"

#include <cmath>

#include "fedngm/error.hpp"

namespace fedngm {

std::string to_string(ModelKind k) { return k == ModelKind::Ngm ? "ngm" : "ngr"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "ngm") return ModelKind::Ngm;
  if (s == "ngr") return ModelKind::Ngr;
  throw ConfigError("unknown model kind '" + s + "' (expected ngm or ngr)");
}

void TrainConfig::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  req(lambda >= 0, "lambda must be >= 0");
  req(lambda_self >= 0, "lambda_self must be >= 0");
  req(gamma_global >= 0, "gamma_global must be >= 0");
  req(gamma_sparsity >= 0, "gamma_sparsity must be >= 0");
  req(learning_rate > 0, "learning_rate must be > 0");
  req(batch_size >= 1, "batch_size must be >= 1");
  req(log_epsilon > 0, "log_epsilon must be > 0");
  req(init_scale > 0, "init_scale must be > 0");
  req(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1 must lie in [0,1)");
  req(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2 must lie in [0,1)");
  req(adam_epsilon > 0, "adam_epsilon must be > 0");
}

double PathPenalty::value(const Eigen::MatrixXd& s_nn) const {
  const double p = s_nn.cwiseProduct(coeff).sum();
  return weight * (log_scaled ? std::log(epsilon + p) : p);
}

double LossBreakdown::term(const std::string& name) const {
  for (const auto& [n, v] : terms)
    if (n == name) return v;
  return 0.0;
}

Objective ngm_objective(const UnitMask& complement, double weight, double log_epsilon) {
  return {{PathPenalty{"structure", weight, complement.values, true, log_epsilon}}};
}

Objective ngr_objective(const FeatureSchema& schema, const TrainConfig& cfg) {
  // sym(S) and both masks are symmetric, so ||sym(S) .* M||_1 == sum(S .* M).
  const auto d = static_cast<Eigen::Index>(schema.encoded_dim());
  Objective obj;
  obj.penalties.push_back({"self_dependency", cfg.lambda_self, diagonal_block_mask(schema).values,
                           cfg.ngr_log_scaling, cfg.log_epsilon});
  obj.penalties.push_back({"sparsity", cfg.gamma_sparsity, Eigen::MatrixXd::Ones(d, d),
                           cfg.ngr_log_scaling, cfg.log_epsilon});
  return obj;
}

namespace {

void check_shapes(const Mlp& m, const Eigen::MatrixXd& x, const Objective& obj) {
  if (static_cast<std::size_t>(x.cols()) != m.input_dim())
    throw ConfigError("data has " + std::to_string(x.cols()) + " columns, model expects " +
                      std::to_string(m.input_dim()));
  for (const auto& p : obj.penalties)
    if (static_cast<std::size_t>(p.coeff.rows()) != m.input_dim() ||
        static_cast<std::size_t>(p.coeff.cols()) != m.output_dim())
      throw ConfigError("penalty '" + p.name + "' mask does not match the model width");
}

void penalties_into(const Eigen::MatrixXd& s, const Objective& obj, LossBreakdown& out) {
  for (const auto& p : obj.penalties) {
    const double v = p.value(s);
    out.terms.emplace_back(p.name, v);
    out.total += v;
  }
}

}  // namespace

LossBreakdown evaluate_objective(const Mlp& m, const Eigen::MatrixXd& x, const Objective& obj) {
  check_shapes(m, x, obj);
  LossBreakdown out;
  out.reconstruction = (x - forward(m, x)).squaredNorm();
  out.total = out.reconstruction;
  penalties_into(path_matrix(m), obj, out);
  return out;
}

LossAndGradient objective_gradient(const Mlp& m, const Eigen::MatrixXd& x, const Objective& obj,
                                   double reconstruction_scale) {
  check_shapes(m, x, obj);
  const std::size_t depth = m.depth();

  // Forward with cached pre-activations.
  std::vector<Eigen::MatrixXd> act(depth + 1), pre(depth);
  act[0] = x;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l] = act[l] * m.weights[l];
    pre[l].rowwise() += m.biases[l].transpose();
    act[l + 1] = pre[l];
    if (l + 1 < depth) {
      if (m.hidden == Activation::Relu) act[l + 1] = act[l + 1].cwiseMax(0.0);
      else if (m.hidden == Activation::Tanh) act[l + 1] = act[l + 1].array().tanh().matrix();
    }
  }

  LossAndGradient out{{}, Mlp::zeros(m.architecture())};
  const Eigen::MatrixXd resid = act[depth] - x;
  out.loss.reconstruction = resid.squaredNorm();
  out.loss.total = reconstruction_scale * out.loss.reconstruction;

  Eigen::MatrixXd delta = (2.0 * reconstruction_scale) * resid;
  for (std::size_t l = depth; l-- > 0;) {
    out.gradient.weights[l].noalias() = act[l].transpose() * delta;
    out.gradient.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * m.weights[l].transpose();
    if (m.hidden == Activation::Relu) back = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    else if (m.hidden == Activation::Tanh) back = back.cwiseProduct((1.0 - act[l].array().square()).matrix());
    delta = std::move(back);
  }

  if (!obj.penalties.empty()) {
    std::vector<Eigen::MatrixXd> absw(depth);
    for (std::size_t l = 0; l < depth; ++l) absw[l] = m.weights[l].cwiseAbs();
    // For layer l: prefix = |W_0|...|W_{l-1}| and suffix = |W_{l+1}|...|W_{L-1}|; empty means identity.
    std::vector<Eigen::MatrixXd> prefix(depth), suffix(depth);
    for (std::size_t l = 0; l < depth; ++l)
      prefix[l] = l == 0 ? Eigen::MatrixXd() : (l == 1 ? absw[0] : Eigen::MatrixXd(prefix[l - 1] * absw[l - 1]));
    for (std::size_t l = depth; l-- > 0;)
      suffix[l] = l + 1 == depth ? Eigen::MatrixXd() : (l + 2 == depth ? absw[depth - 1] : Eigen::MatrixXd(absw[l + 1] * suffix[l + 1]));
    const Eigen::MatrixXd s = depth == 1 ? absw[0] : Eigen::MatrixXd(prefix[depth - 1] * absw[depth - 1]);

    penalties_into(s, obj, out.loss);
    Eigen::MatrixXd ceff = Eigen::MatrixXd::Zero(s.rows(), s.cols());
    for (const auto& p : obj.penalties) {
      if (p.weight == 0.0) continue;
      const double scale = p.log_scaled ? p.weight / (p.epsilon + s.cwiseProduct(p.coeff).sum()) : p.weight;
      ceff += scale * p.coeff;
    }
    for (std::size_t l = 0; l < depth; ++l) {
      Eigen::MatrixXd g = l == 0 ? ceff : Eigen::MatrixXd(prefix[l].transpose() * ceff);
      if (l + 1 < depth) g = g * suffix[l].transpose();
      const Eigen::MatrixXd sign = m.weights[l].unaryExpr([](double w) { return double((w > 0) - (w < 0)); });
      out.gradient.weights[l] += g.cwiseProduct(sign);
    }
  }

  for (std::size_t l = 0; l < depth; ++l)
    if (!out.gradient.weights[l].allFinite() || !out.gradient.biases[l].allFinite())
      throw NumericError("non-finite gradient in layer " + std::to_string(l));
  return out;
}

LossBreakdown ngm_loss(const Mlp& m, const EncodedMatrix& x, const UnitMask& complement, const TrainConfig& cfg) {
  return evaluate_objective(m, x.values, ngm_objective(complement, cfg.lambda, cfg.log_epsilon));
}

LossBreakdown ngr_loss(const Mlp& m, const EncodedMatrix& x, const TrainConfig& cfg) {
  return evaluate_objective(m, x.values, ngr_objective(x.schema, cfg));
}

Mlp loss_gradient(ModelKind kind, const Mlp& m, const EncodedMatrix& x, const UnitMask* complement,
                  const TrainConfig& cfg) {
  if (kind == ModelKind::Ngm) {
    if (!complement) throw ConfigError("NGM gradient needs a complement mask");
    return objective_gradient(m, x.values, ngm_objective(*complement, cfg.lambda, cfg.log_epsilon)).gradient;
  }
  return objective_gradient(m, x.values, ngr_objective(x.schema, cfg)).gradient;
}

}  // namespace fedngm
