#include "fedngm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "fedngm/error.hpp"

namespace fedngm {

std::string to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Continuous: return "continuous";
    case TargetKind::Binary: return "binary";
    case TargetKind::Categorical: return "categorical";
  }
  return "?";
}

std::optional<double> MetricRecord::get(const std::string& name) const {
  for (const auto& [n, v] : values)
    if (n == name) return v;
  return std::nullopt;
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw ConfigError("metric inputs differ in length (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  if (a == 0) throw ConfigError("metric inputs are empty");
}

}  // namespace

MetricRecord evaluate_continuous(std::span<const double> truth, std::span<const double> predicted) {
  check_lengths(truth.size(), predicted.size());
  double abs_sum = 0, sq_sum = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predicted[i] - truth[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double n = static_cast<double>(truth.size());
  return {TargetKind::Continuous, {{"mae", abs_sum / n}, {"rmse", std::sqrt(sq_sum / n)}}};
}

MetricRecord evaluate_binary(std::span<const int> truth, std::span<const double> scores) {
  check_lengths(truth.size(), scores.size());
  MetricRecord r{TargetKind::Binary, {{"auc", std::nullopt}, {"aupr", std::nullopt}}};
  const auto pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1));
  const std::size_t neg = truth.size() - pos;
  if (pos == 0 || neg == 0) return r;

  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Walk tie groups from the highest score down.
  double auc = 0, ap = 0, tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double gtp = 0, gfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] == 1 ? gtp : gfp) += 1;
      ++j;
    }
    const double tpr0 = tp / static_cast<double>(pos), fpr0 = fp / static_cast<double>(neg);
    tp += gtp;
    fp += gfp;
    const double tpr1 = tp / static_cast<double>(pos), fpr1 = fp / static_cast<double>(neg);
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    ap += (tpr1 - tpr0) * (tp / (tp + fp));
    i = j;
  }
  r.values = {{"auc", auc}, {"aupr", ap}};
  return r;
}

MetricRecord evaluate_categorical(std::span<const std::size_t> truth, std::span<const std::size_t> predicted) {
  check_lengths(truth.size(), predicted.size());
  std::set<std::size_t> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  double correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i];
  const double micro = correct / static_cast<double>(truth.size());

  double p_sum = 0, r_sum = 0;
  for (std::size_t c : classes) {
    double tp = 0, labelled = 0, predicted_c = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      tp += truth[i] == c && predicted[i] == c;
      labelled += truth[i] == c;
      predicted_c += predicted[i] == c;
    }
    p_sum += predicted_c > 0 ? tp / predicted_c : 0.0;
    r_sum += labelled > 0 ? tp / labelled : 0.0;
  }
  const double k = static_cast<double>(classes.size());
  return {TargetKind::Categorical,
          {{"micro_precision", micro}, {"micro_recall", micro}, {"macro_precision", p_sum / k}, {"macro_recall", r_sum / k}}};
}

MetricRecord evaluate_predictions(TargetKind kind, std::span<const double> truth, const Eigen::MatrixXd& predicted) {
  check_lengths(truth.size(), static_cast<std::size_t>(predicted.rows()));
  if (kind == TargetKind::Continuous) {
    if (predicted.cols() != 1) throw ConfigError("continuous predictions need one column");
    const Eigen::VectorXd p = predicted.col(0);
    return evaluate_continuous(truth, std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
  }
  if (kind == TargetKind::Binary) {
    if (predicted.cols() != 2) throw ConfigError("binary predictions need two score columns");
    std::vector<int> labels(truth.begin(), truth.end());
    const Eigen::VectorXd s = predicted.col(1) - predicted.col(0);
    return evaluate_binary(labels, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
  }
  std::vector<std::size_t> t(truth.size()), p(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t[i] = static_cast<std::size_t>(truth[i]);
    Eigen::Index best = 0;
    predicted.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    p[i] = static_cast<std::size_t>(best);
  }
  return evaluate_categorical(t, p);
}

std::string metrics_to_jsonl(const std::string& label, const std::string& feature, const MetricRecord& r) {
  std::string out;
  for (const auto& [name, value] : r.values) {
    nlohmann::ordered_json j;
    j["model"] = label;
    j["feature"] = feature;
    j["kind"] = to_string(r.kind);
    j["metric"] = name;
    if (value) j["value"] = *value;
    else j["value"] = "n/a";
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace fedngm
