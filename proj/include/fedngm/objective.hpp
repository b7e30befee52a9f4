#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedngm/graph.hpp"
#include "fedngm/mlp.hpp"
#include "fedngm/schema.hpp"

namespace fedngm {

enum class ModelKind { Ngm, Ngr };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct TrainConfig {
  double lambda = 0.5;           // NGM structure penalty
  double lambda_self = 2.0;      // NGR self-dependency penalty
  double gamma_global = 0.5;     // structure penalty of the distilled global NGM
  double gamma_sparsity = 0.05;  // NGR path sparsity
  // Training multiplies every penalty weight by the number of training rows, so the weights
  // above are per row and transfer across dataset sizes. Loss functions never rescale.
  bool penalty_per_row = true;
  double learning_rate = 3e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double log_epsilon = 1e-8;
  double init_scale = 1.0;
  bool ngr_log_scaling = false;  // log(eps + .) around the NGR structure terms
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;  // throws ConfigError
};

/// weight * phi(sum(S .* coeff)), phi = identity or log(epsilon + .).
struct PathPenalty {
  std::string name;
  double weight = 0.0;
  Eigen::MatrixXd coeff;
  bool log_scaled = false;
  double epsilon = 1e-8;

  double value(const Eigen::MatrixXd& s_nn) const;
};

/// sum_k ||x_k - f(x_k)||^2 + sum of path penalties.
struct Objective {
  std::vector<PathPenalty> penalties;
};

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  double term(const std::string& name) const;  // 0 when absent
};

/// Structure term of a local or global NGM: weight * log(eps + ||S .* complement||_1).
Objective ngm_objective(const UnitMask& complement, double weight, double log_epsilon);

/// NGR terms: lambda_self * ||sym(S) .* S_diag||_1 + gamma * ||sym(S)||_1, optionally log-scaled.
/// S_diag covers the diagonal feature blocks of `schema`.
Objective ngr_objective(const FeatureSchema& schema, const TrainConfig& cfg);

LossBreakdown evaluate_objective(const Mlp& m, const Eigen::MatrixXd& x, const Objective& obj);

struct LossAndGradient {
  LossBreakdown loss;
  Mlp gradient;
};

/// Exact gradient of reconstruction_scale * sum_k ||x_k - f(x_k)||^2 + penalties. The
/// subgradient of |w| at w == 0 is taken as 0. Throws NumericError naming the layer when a
/// gradient entry is not finite.
LossAndGradient objective_gradient(const Mlp& m, const Eigen::MatrixXd& x, const Objective& obj,
                                   double reconstruction_scale = 1.0);

LossBreakdown ngm_loss(const Mlp& m, const EncodedMatrix& x, const UnitMask& complement, const TrainConfig& cfg);
LossBreakdown ngr_loss(const Mlp& m, const EncodedMatrix& x, const TrainConfig& cfg);

/// Gradient of ngm_loss (kind == Ngm, `complement` required) or ngr_loss.
Mlp loss_gradient(ModelKind kind, const Mlp& m, const EncodedMatrix& x, const UnitMask* complement,
                  const TrainConfig& cfg);

}  // namespace fedngm
