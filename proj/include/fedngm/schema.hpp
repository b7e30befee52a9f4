#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedngm {

enum class FeatureKind { Continuous, Categorical };

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  std::vector<std::string> values;  // categorical only

  static Feature continuous(std::string name) { return {std::move(name), FeatureKind::Continuous, {}}; }
  static Feature categorical(std::string name, std::vector<std::string> values) {
    return {std::move(name), FeatureKind::Categorical, std::move(values)};
  }
  bool is_categorical() const { return kind == FeatureKind::Categorical; }
  std::size_t width() const { return is_categorical() ? values.size() : 1; }
  std::optional<std::size_t> value_index(const std::string& v) const;

  bool operator==(const Feature&) const = default;
};

/// Half-open range of encoded columns owned by one feature.
struct UnitRange {
  std::size_t begin = 0;
  std::size_t size = 0;
  std::size_t end() const { return begin + size; }
};

/// Ordered feature list plus the map from features into the one-hot encoded space.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  /// Throws SchemaError on duplicate names or empty/duplicate categorical values.
  explicit FeatureSchema(std::vector<Feature> features);

  const std::vector<Feature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  const Feature& operator[](std::size_t i) const { return features_[i]; }

  /// Encoded dimension D.
  std::size_t encoded_dim() const { return dim_; }
  UnitRange range(std::size_t feature) const { return ranges_[feature]; }
  /// Feature that owns encoded column `unit`.
  std::size_t owner(std::size_t unit) const { return owners_[unit]; }

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws SchemaError
  std::vector<std::string> names() const;

  /// Sub-schema with the named features in the given order.
  FeatureSchema select(std::span<const std::string> names) const;

  bool operator==(const FeatureSchema& o) const { return features_ == o.features_; }

 private:
  std::vector<Feature> features_;
  std::vector<UnitRange> ranges_;
  std::vector<std::size_t> owners_;
  std::size_t dim_ = 0;
};

/// Tabular dataset. Cells are stored numerically: continuous features hold their value,
/// categorical features hold the index into the feature's value list.
class Dataset {
 public:
  Dataset() = default;
  /// Validates cells against the schema; throws SchemaError naming feature and row.
  Dataset(std::string name, FeatureSchema schema, Eigen::MatrixXd cells);

  /// Builds from string cells; categorical strings are looked up in the schema's value lists.
  static Dataset from_strings(std::string name, FeatureSchema schema,
                              const std::vector<std::vector<std::string>>& rows);

  const std::string& name() const { return name_; }
  const FeatureSchema& schema() const { return schema_; }
  const Eigen::MatrixXd& cells() const { return cells_; }
  std::size_t rows() const { return static_cast<std::size_t>(cells_.rows()); }

  /// Value of a categorical cell as its label.
  const std::string& label(std::size_t row, std::size_t feature) const;
  std::string cell_text(std::size_t row, std::size_t feature) const;

  Dataset select_features(std::span<const std::string> names) const;
  Dataset select_rows(std::span<const std::size_t> rows, std::string name) const;
  Dataset renamed(std::string name) const;

  /// Re-expresses categorical cells against another schema with the same feature names
  /// (value lists may be ordered differently or be supersets). Throws SchemaError on unseen values.
  Dataset conform_to(const FeatureSchema& target) const;

 private:
  std::string name_;
  FeatureSchema schema_;
  Eigen::MatrixXd cells_;
};

/// Per-encoded-column affine normalization (categorical columns are identity: mean 0, std 1).
struct ColumnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static ColumnStats identity(std::size_t dim);
  bool operator==(const ColumnStats& o) const { return mean == o.mean && std == o.std; }
};

/// Rows of a dataset in the model's real-valued input space.
struct EncodedMatrix {
  Eigen::MatrixXd values;  // M x D, continuous columns z-normalized
  FeatureSchema schema;
  ColumnStats stats;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

/// Computes continuous-column stats from the data; throws SchemaError("degenerate feature")
/// on zero variance.
ColumnStats fit_stats(const Dataset& d);

/// One-hot encodes and z-normalizes with stats fitted on `d`.
EncodedMatrix encode_dataset(const Dataset& d);

/// Encodes `d` into an existing schema/stat space (inference on new data).
EncodedMatrix encode_with(const Dataset& d, const FeatureSchema& schema, const ColumnStats& stats);

/// Inverse of encoding: de-normalizes continuous columns and takes the argmax of each
/// categorical block.
Dataset decode(const EncodedMatrix& x, std::string name = "decoded");

/// Raw (de-normalized) continuous values; categorical columns copied as-is.
Eigen::MatrixXd denormalize(const EncodedMatrix& x);

/// Re-expresses `x` in a different normalization (same schema).
EncodedMatrix renormalize(const EncodedMatrix& x, const ColumnStats& stats);

/// Decodes each part, conforms it to `schema` and re-encodes the concatenation with stats
/// fitted on the pooled raw values.
EncodedMatrix pool_encoded(std::span<const EncodedMatrix> parts, const FeatureSchema& schema);

/// Schema over `names` whose categorical value lists are the sorted union of the inputs'.
FeatureSchema union_schema(std::span<const FeatureSchema> schemas, std::span<const std::string> names);

}  // namespace fedngm
