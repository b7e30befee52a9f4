#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fedngm/mlp.hpp"
#include "fedngm/objective.hpp"

namespace fedngm {

/// Per-parameter freeze flags with the same shapes as an Mlp.
struct ParamMask {
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> weights;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, 1>> biases;

  static ParamMask none(const MlpArchitecture& arch);
  static ParamMask all(const MlpArchitecture& arch);
  std::size_t count() const;
  bool covers_everything() const;
};

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // one full-objective estimate per epoch
};

/// Minibatch Adam on the objective. Rows are put in a canonical (sorted) order before the
/// seeded per-epoch shuffles, so the result does not depend on the input row order. The
/// reconstruction gradient of each batch is scaled by M/|batch|, an unbiased estimate of the
/// full-sum objective. With cfg.penalty_per_row the penalty weights are multiplied by M.
/// Throws NumericError naming the epoch when the loss diverges.
TrainResult train(const Mlp& init, const Eigen::MatrixXd& x, const Objective& obj, const TrainConfig& cfg);

/// As train(), but parameters flagged in `frozen` never change. When everything is frozen a
/// warning is logged and the input is returned unchanged.
TrainResult freeze_mask_train(const Mlp& init, const ParamMask& frozen, const Eigen::MatrixXd& x,
                              const Objective& obj, const TrainConfig& cfg);

/// Convenience form: NGM (with complement mask) or NGR objective on encoded data.
TrainResult train(ModelKind kind, const Mlp& init, const EncodedMatrix& x, const UnitMask* complement,
                  const TrainConfig& cfg);

/// Row indices of `x` sorted lexicographically by row contents.
std::vector<std::size_t> canonical_row_order(const Eigen::MatrixXd& x);

}  // namespace fedngm
