#include "fedngm/mlp.hpp"

#include <cmath>
#include <random>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

MlpArchitecture MlpArchitecture::symmetric(std::size_t d, std::vector<std::size_t> hidden_widths, Activation act) {
  MlpArchitecture a;
  a.layer_dims.push_back(d);
  a.layer_dims.insert(a.layer_dims.end(), hidden_widths.begin(), hidden_widths.end());
  a.layer_dims.push_back(d);
  a.hidden = act;
  return a;
}

void MlpArchitecture::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("architecture needs at least one layer");
  for (auto d : layer_dims)
    if (d < 1) throw ConfigError("architecture has a zero-width layer");
  if (layer_dims.front() != layer_dims.back())
    throw ConfigError("architecture input and output widths differ");
}

Mlp Mlp::zeros(const MlpArchitecture& arch) {
  arch.validate();
  Mlp m;
  m.hidden = arch.hidden;
  for (std::size_t l = 0; l + 1 < arch.layer_dims.size(); ++l) {
    m.weights.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arch.layer_dims[l]),
                                              static_cast<Eigen::Index>(arch.layer_dims[l + 1])));
    m.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.layer_dims[l + 1])));
  }
  return m;
}

Mlp Mlp::random(const MlpArchitecture& arch, std::uint64_t seed, double init_scale) {
  Mlp m = zeros(arch);
  Rng rng(seed);
  for (auto& w : m.weights) {
    const double bound = init_scale / std::sqrt(static_cast<double>(w.rows()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
  }
  return m;
}

MlpArchitecture Mlp::architecture() const {
  MlpArchitecture a;
  a.hidden = hidden;
  a.layer_dims.push_back(input_dim());
  for (const auto& w : weights) a.layer_dims.push_back(static_cast<std::size_t>(w.cols()));
  return a;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

bool Mlp::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

Mlp& Mlp::axpy(double a, const Mlp& x) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += a * x.weights[l];
    biases[l] += a * x.biases[l];
  }
  return *this;
}

bool Mlp::operator==(const Mlp& o) const {
  if (hidden != o.hidden || weights.size() != o.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols()) return false;
    if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
  }
  return true;
}

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Identity: break;
  }
}

}  // namespace

Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != m.input_dim())
    throw ConfigError("forward: input has " + std::to_string(x.cols()) + " columns, model expects " +
                      std::to_string(m.input_dim()));
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < m.depth(); ++l) {
    Eigen::MatrixXd z = a * m.weights[l];
    z.rowwise() += m.biases[l].transpose();
    if (l + 1 < m.depth()) activate(z, m.hidden);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const Mlp& m, const Eigen::VectorXd& x) {
  return forward(m, Eigen::MatrixXd(x.transpose())).row(0).transpose();
}

Eigen::MatrixXd path_matrix(const Mlp& m) {
  Eigen::MatrixXd s = m.weights.front().cwiseAbs();
  for (std::size_t l = 1; l < m.depth(); ++l) s = s * m.weights[l].cwiseAbs();
  return s;
}

}  // namespace fedngm
