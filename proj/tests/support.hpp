// Shared oracles and fixtures for the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedngm/mlp.hpp"
#include "fedngm/objective.hpp"
#include "fedngm/rng.hpp"
#include "fedngm/schema.hpp"

namespace fedngm::testing {

inline Dataset continuous_dataset(std::string name, const Eigen::MatrixXd& x, const std::string& prefix = "x") {
  std::vector<Feature> f;
  for (Eigen::Index j = 0; j < x.cols(); ++j) f.push_back(Feature::continuous(prefix + std::to_string(j)));
  return Dataset(std::move(name), FeatureSchema(std::move(f)), x);
}

// Closed-form least squares of column `target` on the other columns plus an intercept,
// fitted on `train`, returns RMSE on `test`.
inline double linear_oracle_rmse(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, Eigen::Index target) {
  auto design = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a(x.rows(), x.cols());
    a.col(0).setOnes();
    Eigen::Index k = 1;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (j != target) a.col(k++) = x.col(j);
    return a;
  };
  const Eigen::MatrixXd a = design(train);
  const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(train.col(target));
  const Eigen::VectorXd resid = design(test) * beta - test.col(target);
  return std::sqrt(resid.squaredNorm() / static_cast<double>(test.rows()));
}

// Reachability by depth-first enumeration over nonzero weights.
inline bool path_exists(const Mlp& m, std::size_t in, std::size_t out) {
  std::vector<std::size_t> frontier{in};
  for (std::size_t l = 0; l < m.depth(); ++l) {
    std::vector<std::size_t> next;
    const auto& w = m.weights[l];
    for (Eigen::Index o = 0; o < w.cols(); ++o)
      for (auto i : frontier)
        if (w(static_cast<Eigen::Index>(i), o) != 0.0) {
          next.push_back(static_cast<std::size_t>(o));
          break;
        }
    frontier = std::move(next);
  }
  for (auto o : frontier)
    if (o == out) return true;
  return false;
}

// Largest relative disagreement between the analytic loss gradient and central finite
// differences. The denominator is floored at 1e-3 of the largest gradient entry, so entries
// that are tiny on the scale of the whole gradient are compared absolutely.
inline double gradient_check(ModelKind kind, const Mlp& m, const EncodedMatrix& x, const UnitMask* complement,
                             const TrainConfig& cfg, double h = 1e-5) {
  auto loss = [&](const Mlp& net) {
    return kind == ModelKind::Ngm ? ngm_loss(net, x, *complement, cfg).total : ngr_loss(net, x, cfg).total;
  };
  const Mlp g = loss_gradient(kind, m, x, complement, cfg);
  double scale = 0.0;
  for (std::size_t l = 0; l < g.depth(); ++l)
    scale = std::max({scale, g.weights[l].cwiseAbs().maxCoeff(), g.biases[l].cwiseAbs().maxCoeff()});
  const double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  Mlp probe = m;
  auto visit = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss(probe);
    param = keep - h;
    const double down = loss(probe);
    param = keep;
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor}));
  };
  for (std::size_t l = 0; l < m.depth(); ++l) {
    for (Eigen::Index i = 0; i < probe.weights[l].size(); ++i) visit(probe.weights[l].data()[i], g.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < probe.biases[l].size(); ++i) visit(probe.biases[l].data()[i], g.biases[l].data()[i]);
  }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fedngm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace fedngm::testing
