#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedngm/schema.hpp"

namespace fedngm {

/// Per-column overrides for CSV type inference.
///
/// JSON notation (the `schema_hints` file accepted by the CLI):
///
///     { "features": { "pay":  { "kind": "categorical", "values": ["0", "1"] },
///                     "bw":   { "kind": "continuous" } },
///       "drop": ["row_id"] }
///
/// `values` fixes the category order; when absent the values found in the file are used,
/// in sorted order.
struct SchemaHints {
  struct Column {
    FeatureKind kind = FeatureKind::Continuous;
    std::optional<std::vector<std::string>> values;
  };
  std::map<std::string, Column> columns;
  std::vector<std::string> drop;

  static SchemaHints from_json_file(const std::filesystem::path& path);
};

/// Hints that pin every column of `schema` (kinds and category order), as a JSON document.
std::string schema_hints_text(const FeatureSchema& schema);

/// Splits one RFC-4180 record. `line` must hold the complete record (embedded newlines
/// already joined).
std::vector<std::string> parse_csv_record(const std::string& line);

/// Reads a CSV with a header row. A column is continuous when every cell parses as a number,
/// categorical otherwise (unless overridden). Empty cells and ragged rows are rejected with
/// the offending line number.
Dataset load_csv(const std::filesystem::path& path, const SchemaHints& hints = {});

void write_csv(const Dataset& d, const std::filesystem::path& path);

}  // namespace fedngm
