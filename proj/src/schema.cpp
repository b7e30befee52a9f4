#include "fedngm/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "fedngm/error.hpp"

namespace fedngm {

std::optional<std::size_t> Feature::value_index(const std::string& v) const {
  auto it = std::find(values.begin(), values.end(), v);
  if (it == values.end()) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}

FeatureSchema::FeatureSchema(std::vector<Feature> features) : features_(std::move(features)) {
  std::unordered_set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature with empty name");
    if (!seen.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
    if (f.is_categorical()) {
      if (f.values.empty()) throw SchemaError("categorical feature '" + f.name + "' has no values");
      std::unordered_set<std::string> vs(f.values.begin(), f.values.end());
      if (vs.size() != f.values.size())
        throw SchemaError("categorical feature '" + f.name + "' has duplicate values");
    } else if (!f.values.empty()) {
      throw SchemaError("continuous feature '" + f.name + "' carries a value list");
    }
  }
  ranges_.reserve(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const std::size_t w = features_[i].width();
    ranges_.push_back({dim_, w});
    owners_.insert(owners_.end(), w, i);
    dim_ += w;
  }
}

std::optional<std::size_t> FeatureSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  return std::nullopt;
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("unknown feature '" + name + "'");
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

FeatureSchema FeatureSchema::select(std::span<const std::string> names) const {
  std::vector<Feature> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(features_[index_of(n)]);
  return FeatureSchema(std::move(out));
}

namespace {

void validate_cells(const FeatureSchema& schema, const Eigen::MatrixXd& cells) {
  if (static_cast<std::size_t>(cells.cols()) != schema.size())
    throw SchemaError("dataset has " + std::to_string(cells.cols()) + " columns, schema has " +
                      std::to_string(schema.size()) + " features");
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const Feature& f = schema[j];
    for (Eigen::Index r = 0; r < cells.rows(); ++r) {
      const double v = cells(r, static_cast<Eigen::Index>(j));
      if (!std::isfinite(v))
        throw SchemaError("non-finite value in feature '" + f.name + "' at row " + std::to_string(r));
      if (f.is_categorical() &&
          (v < 0 || v != std::floor(v) || v >= static_cast<double>(f.values.size())))
        throw SchemaError("invalid category code in feature '" + f.name + "' at row " +
                          std::to_string(r));
    }
  }
}

}  // namespace

Dataset::Dataset(std::string name, FeatureSchema schema, Eigen::MatrixXd cells)
    : name_(std::move(name)), schema_(std::move(schema)), cells_(std::move(cells)) {
  if (cells_.rows() < 1) throw SchemaError("dataset '" + name_ + "' has no rows");
  validate_cells(schema_, cells_);
}

Dataset Dataset::from_strings(std::string name, FeatureSchema schema,
                              const std::vector<std::vector<std::string>>& rows) {
  Eigen::MatrixXd cells(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(schema.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size())
      throw SchemaError("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                        " cells, expected " + std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const Feature& f = schema[j];
      const std::string& text = rows[r][j];
      double v = 0;
      if (f.is_categorical()) {
        auto idx = f.value_index(text);
        if (!idx)
          throw SchemaError("unseen value '" + text + "' for feature '" + f.name + "' at row " +
                            std::to_string(r));
        v = static_cast<double>(*idx);
      } else {
        try {
          std::size_t used = 0;
          v = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
        } catch (const std::exception&) {
          throw SchemaError("non-numeric value '" + text + "' for feature '" + f.name +
                            "' at row " + std::to_string(r));
        }
      }
      cells(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return Dataset(std::move(name), std::move(schema), std::move(cells));
}

const std::string& Dataset::label(std::size_t row, std::size_t feature) const {
  const auto code = static_cast<std::size_t>(
      cells_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(feature)));
  return schema_[feature].values.at(code);
}

std::string Dataset::cell_text(std::size_t row, std::size_t feature) const {
  if (schema_[feature].is_categorical()) return label(row, feature);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g",
                cells_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(feature)));
  return buf;
}

Dataset Dataset::select_features(std::span<const std::string> names) const {
  Eigen::MatrixXd out(cells_.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = cells_.col(static_cast<Eigen::Index>(schema_.index_of(names[j])));
  return Dataset(name_, schema_.select(names), std::move(out));
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows, std::string name) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), cells_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = cells_.row(static_cast<Eigen::Index>(rows[i]));
  return Dataset(std::move(name), schema_, std::move(out));
}

Dataset Dataset::renamed(std::string name) const {
  Dataset d = *this;
  d.name_ = std::move(name);
  return d;
}

Dataset Dataset::conform_to(const FeatureSchema& target) const {
  Eigen::MatrixXd out(cells_.rows(), static_cast<Eigen::Index>(target.size()));
  for (std::size_t j = 0; j < target.size(); ++j) {
    const Feature& tf = target[j];
    const std::size_t src = schema_.index_of(tf.name);
    const Feature& sf = schema_[src];
    if (sf.kind != tf.kind) throw SchemaError("feature '" + tf.name + "' changes kind");
    if (!tf.is_categorical()) {
      out.col(static_cast<Eigen::Index>(j)) = cells_.col(static_cast<Eigen::Index>(src));
      continue;
    }
    std::vector<double> remap(sf.values.size(), -1.0);
    for (std::size_t v = 0; v < sf.values.size(); ++v)
      if (auto t = tf.value_index(sf.values[v])) remap[v] = static_cast<double>(*t);
    for (Eigen::Index r = 0; r < cells_.rows(); ++r) {
      const auto code = static_cast<std::size_t>(cells_(r, static_cast<Eigen::Index>(src)));
      if (remap[code] < 0)
        throw SchemaError("unseen value '" + sf.values[code] + "' for feature '" + tf.name +
                          "' at row " + std::to_string(r));
      out(r, static_cast<Eigen::Index>(j)) = remap[code];
    }
  }
  return Dataset(name_, target, std::move(out));
}

ColumnStats ColumnStats::identity(std::size_t dim) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
          Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))};
}

ColumnStats fit_stats(const Dataset& d) {
  const FeatureSchema& s = d.schema();
  ColumnStats stats = ColumnStats::identity(s.encoded_dim());
  const double m = static_cast<double>(d.rows());
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j].is_categorical()) continue;
    const auto col = d.cells().col(static_cast<Eigen::Index>(j));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / m;
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw SchemaError("degenerate feature '" + s[j].name + "' (zero variance)");
    const auto u = static_cast<Eigen::Index>(s.range(j).begin);
    stats.mean(u) = mean;
    stats.std(u) = sd;
  }
  return stats;
}

EncodedMatrix encode_with(const Dataset& d, const FeatureSchema& schema, const ColumnStats& stats) {
  const Dataset src = d.schema() == schema ? d : d.conform_to(schema);
  const auto rows = static_cast<Eigen::Index>(src.rows());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(schema.encoded_dim()));
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const UnitRange r = schema.range(j);
    const auto col = src.cells().col(static_cast<Eigen::Index>(j));
    const auto u = static_cast<Eigen::Index>(r.begin);
    if (schema[j].is_categorical()) {
      for (Eigen::Index i = 0; i < rows; ++i) x(i, u + static_cast<Eigen::Index>(col(i))) = 1.0;
    } else {
      x.col(u) = (col.array() - stats.mean(u)) / stats.std(u);
    }
  }
  return {std::move(x), schema, stats};
}

EncodedMatrix encode_dataset(const Dataset& d) {
  return encode_with(d, d.schema(), fit_stats(d));
}

Eigen::MatrixXd denormalize(const EncodedMatrix& x) {
  Eigen::MatrixXd raw = x.values;
  for (std::size_t j = 0; j < x.schema.size(); ++j) {
    if (x.schema[j].is_categorical()) continue;
    const auto u = static_cast<Eigen::Index>(x.schema.range(j).begin);
    raw.col(u) = (x.values.col(u).array() * x.stats.std(u) + x.stats.mean(u)).matrix();
  }
  return raw;
}

Dataset decode(const EncodedMatrix& x, std::string name) {
  const FeatureSchema& s = x.schema;
  const Eigen::MatrixXd raw = denormalize(x);
  Eigen::MatrixXd cells(raw.rows(), static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) {
    const UnitRange r = s.range(j);
    const auto u = static_cast<Eigen::Index>(r.begin);
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      if (s[j].is_categorical()) {
        Eigen::Index best = 0;
        raw.row(i).segment(u, static_cast<Eigen::Index>(r.size)).maxCoeff(&best);
        cells(i, static_cast<Eigen::Index>(j)) = static_cast<double>(best);
      } else {
        cells(i, static_cast<Eigen::Index>(j)) = raw(i, u);
      }
    }
  }
  return Dataset(std::move(name), s, std::move(cells));
}

EncodedMatrix renormalize(const EncodedMatrix& x, const ColumnStats& stats) {
  Eigen::MatrixXd raw = denormalize(x);
  for (std::size_t j = 0; j < x.schema.size(); ++j) {
    if (x.schema[j].is_categorical()) continue;
    const auto u = static_cast<Eigen::Index>(x.schema.range(j).begin);
    raw.col(u) = ((raw.col(u).array() - stats.mean(u)) / stats.std(u)).matrix();
  }
  return {std::move(raw), x.schema, stats};
}

EncodedMatrix pool_encoded(std::span<const EncodedMatrix> parts, const FeatureSchema& schema) {
  if (parts.empty()) throw ConfigError("pool_encoded: no sample sets");
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.values.rows();
  Eigen::MatrixXd cells(total, static_cast<Eigen::Index>(schema.size()));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    const Dataset d = decode(p).conform_to(schema);
    cells.middleRows(at, d.cells().rows()) = d.cells();
    at += d.cells().rows();
  }
  return encode_dataset(Dataset("pooled", schema, std::move(cells)));
}

FeatureSchema union_schema(std::span<const FeatureSchema> schemas, std::span<const std::string> names) {
  std::vector<Feature> out;
  for (const auto& n : names) {
    std::optional<Feature> merged;
    std::set<std::string> values;
    for (const auto& s : schemas) {
      const Feature& f = s[s.index_of(n)];
      if (!merged) merged = f;
      else if (merged->kind != f.kind)
        throw SchemaError("feature '" + n + "' is continuous for some clients and categorical for others");
      values.insert(f.values.begin(), f.values.end());
    }
    if (!merged) throw SchemaError("union_schema: no schemas");
    merged->values.assign(values.begin(), values.end());
    out.push_back(std::move(*merged));
  }
  return FeatureSchema(std::move(out));
}

}  // namespace fedngm
