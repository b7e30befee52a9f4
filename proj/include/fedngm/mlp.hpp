#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedngm {

enum class Activation { Relu, Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Layer widths [D, h_1, ..., h_{L-1}, D]; hidden layers use `hidden`, the output is linear.
struct MlpArchitecture {
  std::vector<std::size_t> layer_dims;
  Activation hidden = Activation::Relu;

  /// [D, hidden..., D] with the given hidden widths.
  static MlpArchitecture symmetric(std::size_t d, std::vector<std::size_t> hidden_widths,
                                   Activation act = Activation::Relu);

  std::size_t depth() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  void validate() const;  // throws ConfigError
  bool operator==(const MlpArchitecture&) const = default;
};

/// Weights are stored input-rows x output-cols, so a batch forward pass is X * W + b and the
/// product of |W_l| is indexed [input unit, output unit].
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Activation hidden = Activation::Relu;

  static Mlp zeros(const MlpArchitecture& arch);
  /// Weights uniform in +-init_scale/sqrt(fan_in), biases zero.
  static Mlp random(const MlpArchitecture& arch, std::uint64_t seed, double init_scale = 1.0);

  MlpArchitecture architecture() const;
  std::size_t depth() const { return weights.size(); }
  std::size_t input_dim() const { return static_cast<std::size_t>(weights.front().rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weights.back().cols()); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Elementwise a*x + b over all parameters (used for gradient steps and finite differences).
  Mlp& axpy(double a, const Mlp& x);
  bool operator==(const Mlp& o) const;
};

/// Batch forward pass over rows of `x`. Throws ConfigError on a width mismatch.
Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& x);
Eigen::VectorXd forward(const Mlp& m, const Eigen::VectorXd& x);

/// Path matrix S = |W_1| |W_2| ... |W_L|; entry (i, o) aggregates every input-i to output-o path.
Eigen::MatrixXd path_matrix(const Mlp& m);

}  // namespace fedngm

namespace fedngm {

/// Hidden-layer layout independent of the encoded width D, which is only known after encoding.
struct ArchSpec {
  std::vector<std::size_t> hidden = {64};
  Activation activation = Activation::Relu;

  MlpArchitecture for_dim(std::size_t d) const { return MlpArchitecture::symmetric(d, hidden, activation); }
};

}  // namespace fedngm
