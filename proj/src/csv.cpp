#include "fedngm/csv.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fedngm/error.hpp"

namespace fedngm {

SchemaHints SchemaHints::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema hints '" + path.string() + "'");
  SchemaHints hints;
  try {
    const auto doc = nlohmann::json::parse(in);
    const auto features = doc.value("features", nlohmann::json::object());
    for (const auto& [name, spec] : features.items()) {
      Column col;
      const std::string kind = spec.at("kind").get<std::string>();
      if (kind == "categorical") col.kind = FeatureKind::Categorical;
      else if (kind == "continuous") col.kind = FeatureKind::Continuous;
      else throw ConfigError("schema hint for '" + name + "': unknown kind '" + kind + "'");
      if (spec.contains("values")) col.values = spec.at("values").get<std::vector<std::string>>();
      hints.columns.emplace(name, std::move(col));
    }
    hints.drop = doc.value("drop", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema hints '" + path.string() + "': " + e.what());
  }
  return hints;
}

std::string schema_hints_text(const FeatureSchema& schema) {
  nlohmann::ordered_json features = nlohmann::ordered_json::object();
  for (const auto& f : schema.features()) {
    nlohmann::ordered_json col;
    col["kind"] = f.is_categorical() ? "categorical" : "continuous";
    if (f.is_categorical()) col["values"] = f.values;
    features[f.name] = std::move(col);
  }
  nlohmann::ordered_json doc;
  doc["features"] = std::move(features);
  return doc.dump(2) + "\n";
}

std::vector<std::string> parse_csv_record(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ConfigError("unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

namespace {

bool parses_numeric(const std::string& s) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const SchemaHints& hints) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");

  // Records may span physical lines inside quotes; track the starting line for messages.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> records;
  std::string line, pending;
  std::size_t line_no = 0, record_start = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (pending.empty()) record_start = line_no;
    pending += line;
    if (std::count(pending.begin(), pending.end(), '"') % 2 == 1) {
      pending += '\n';
      continue;
    }
    if (!pending.empty() && pending != "\r") {
      try {
        records.emplace_back(record_start, parse_csv_record(pending));
      } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ":" + std::to_string(record_start) + ": " + e.what());
      }
    }
    pending.clear();
  }
  if (!pending.empty())
    throw ConfigError(path.string() + ":" + std::to_string(record_start) + ": unterminated quoted field");
  if (records.empty()) throw ConfigError(path.string() + ": missing header row");

  const std::vector<std::string> header = records.front().second;
  for (const auto& h : header)
    if (h.empty()) throw ConfigError(path.string() + ":1: empty column name in header");
  records.erase(records.begin());
  if (records.empty()) throw ConfigError(path.string() + ": no data rows");

  for (const auto& [ln, rec] : records) {
    if (rec.size() != header.size())
      throw ConfigError(path.string() + ":" + std::to_string(ln) + ": ragged row with " +
                        std::to_string(rec.size()) + " cells, header has " +
                        std::to_string(header.size()));
    for (std::size_t j = 0; j < rec.size(); ++j)
      if (rec[j].empty())
        throw ConfigError(path.string() + ":" + std::to_string(ln) + ": missing value in column '" +
                          header[j] + "'");
  }

  std::vector<std::size_t> keep;
  std::vector<Feature> features;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (std::find(hints.drop.begin(), hints.drop.end(), header[j]) != hints.drop.end()) continue;
    keep.push_back(j);
    auto hint = hints.columns.find(header[j]);
    bool categorical = false;
    if (hint != hints.columns.end()) {
      categorical = hint->second.kind == FeatureKind::Categorical;
    } else {
      categorical = std::any_of(records.begin(), records.end(),
                                [&](const auto& r) { return !parses_numeric(r.second[j]); });
    }
    if (!categorical) {
      features.push_back(Feature::continuous(header[j]));
      continue;
    }
    std::vector<std::string> values;
    if (hint != hints.columns.end() && hint->second.values) {
      values = *hint->second.values;
    } else {
      std::set<std::string> uniq;
      for (const auto& r : records) uniq.insert(r.second[j]);
      values.assign(uniq.begin(), uniq.end());
    }
    features.push_back(Feature::categorical(header[j], std::move(values)));
  }

  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& [ln, rec] : records) {
    std::vector<std::string> r;
    r.reserve(keep.size());
    for (std::size_t j : keep) r.push_back(rec[j]);
    rows.push_back(std::move(r));
  }
  try {
    return Dataset::from_strings(path.stem().string(), FeatureSchema(std::move(features)), rows);
  } catch (const SchemaError& e) {
    // Row indices from from_strings are 0-based data rows; translate to file lines.
    throw SchemaError(path.string() + ": " + e.what() + " (data row 0 is line 2)");
  }
}

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  const auto& s = d.schema();
  for (std::size_t j = 0; j < s.size(); ++j) out << (j ? "," : "") << quote(s[j].name);
  out << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t j = 0; j < s.size(); ++j) out << (j ? "," : "") << quote(d.cell_text(r, j));
    out << '\n';
  }
}

}  // namespace fedngm
