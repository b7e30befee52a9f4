#include "fedngm/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedngm/error.hpp"
#include "fedngm/rng.hpp"

namespace fedngm {

namespace {

constexpr std::string_view kMagic = "FEDNGMv1";
constexpr std::uint32_t kFormatVersion = 1;

using json = nlohmann::ordered_json;

template <typename T>
void put_raw(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    out.append(bytes.data(), bytes.size());
  } else {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw ConfigError("model document is truncated");
    std::array<char, sizeof(T)> buf;
    std::memcpy(buf.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf.begin(), buf.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(buf);
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ConfigError("model document is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json schema_to_json(const FeatureSchema& s) {
  json out = json::array();
  for (const auto& f : s.features()) {
    json j;
    j["name"] = f.name;
    j["kind"] = f.is_categorical() ? "categorical" : "continuous";
    if (f.is_categorical()) j["values"] = f.values;
    out.push_back(std::move(j));
  }
  return out;
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  std::vector<Feature> fs;
  for (const auto& f : j) {
    const auto kind = f.at("kind").get<std::string>();
    if (kind == "categorical")
      fs.push_back(Feature::categorical(f.at("name"), f.at("values").get<std::vector<std::string>>()));
    else if (kind == "continuous")
      fs.push_back(Feature::continuous(f.at("name")));
    else
      throw ConfigError("unknown feature kind '" + kind + "'");
  }
  return FeatureSchema(std::move(fs));
}

json graph_json(const DependencyGraph& g) { return json::parse(graph_to_json(g)); }

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_raw(out, m(r, c));
}

void put_vector(std::string& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_raw(out, v(i));
}

Eigen::MatrixXd get_matrix(Reader& in, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.get<double>();
  return m;
}

Eigen::VectorXd get_vector(Reader& in, std::size_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = in.get<double>();
  return v;
}

std::string serialize(const GraphicalModel& m, json extra) {
  if (!m.trained()) throw ConfigError("cannot serialize an untrained model");
  json header;
  header["kind"] = to_string(m.kind);
  header["schema"] = schema_to_json(m.schema);
  header["layer_dims"] = m.mlp.architecture().layer_dims;
  header["activation"] = to_string(m.mlp.hidden);
  header["provenance"] = m.provenance;
  header["training_rows"] = m.training_rows;
  for (auto& [k, v] : extra.items()) header[k] = v;
  const std::string text = header.dump();

  std::string out(kMagic);
  put_raw(out, kFormatVersion);
  put_raw(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  for (std::size_t l = 0; l < m.mlp.depth(); ++l) {
    put_matrix(out, m.mlp.weights[l]);
    put_vector(out, m.mlp.biases[l]);
  }
  put_vector(out, m.stats.mean);
  put_vector(out, m.stats.std);
  put_vector(out, m.unit_mean);
  put_vector(out, m.residual_std);
  return out;
}

}  // namespace

const GraphicalModel& base_of(const AnyModel& m) {
  return std::visit([](const auto& x) -> const GraphicalModel& { return x; }, m);
}

void record_training_stats(GraphicalModel& m, const Eigen::MatrixXd& x) {
  m.training_rows = static_cast<std::size_t>(x.rows());
  m.unit_mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd resid = x - forward(m.mlp, x);
  m.residual_std = (resid.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt().transpose();
}

std::string serialize_model(const NgmModel& m) {
  json extra;
  extra["graph"] = graph_json(m.graph);
  return serialize(m, std::move(extra));
}

std::string serialize_model(const NgrModel& m) {
  json extra;
  if (m.extracted_graph) {
    extra["extracted_graph"] = graph_json(*m.extracted_graph);
    extra["extracted_tau"] = m.extracted_tau;
  }
  return serialize(m, std::move(extra));
}

std::string serialize_model(const AnyModel& m) {
  return std::visit([](const auto& x) { return serialize_model(x); }, m);
}

AnyModel deserialize_model(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) throw ConfigError("not a model document (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion) throw ConfigError("unsupported model format version " + std::to_string(version));
  const auto header_len = in.get<std::uint64_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.take(static_cast<std::size_t>(header_len)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model header: ") + e.what());
  }
  try {
    GraphicalModel base;
    base.kind = model_kind_from_string(header.at("kind"));
    base.schema = schema_from_json(header.at("schema"));
    base.provenance = header.value("provenance", "");
    base.training_rows = header.value("training_rows", std::size_t{0});
    MlpArchitecture arch;
    arch.layer_dims = header.at("layer_dims").get<std::vector<std::size_t>>();
    arch.hidden = activation_from_string(header.at("activation"));
    arch.validate();
    if (arch.input_dim() != base.schema.encoded_dim())
      throw ConfigError("model width does not match its schema");
    base.mlp = Mlp::zeros(arch);
    for (std::size_t l = 0; l < base.mlp.depth(); ++l) {
      base.mlp.weights[l] = get_matrix(in, arch.layer_dims[l], arch.layer_dims[l + 1]);
      base.mlp.biases[l] = get_vector(in, arch.layer_dims[l + 1]);
    }
    const std::size_t d = base.schema.encoded_dim();
    base.stats.mean = get_vector(in, d);
    base.stats.std = get_vector(in, d);
    base.unit_mean = get_vector(in, d);
    base.residual_std = get_vector(in, d);
    if (!in.done()) throw ConfigError("trailing bytes after model payload");

    if (base.kind == ModelKind::Ngm) {
      NgmModel m;
      static_cast<GraphicalModel&>(m) = std::move(base);
      m.graph = graph_from_json(header.at("graph").dump());
      m.mask_complement = complement_mask(m.graph, m.schema, false);
      return m;
    }
    NgrModel m;
    static_cast<GraphicalModel&>(m) = std::move(base);
    if (header.contains("extracted_graph")) {
      m.extracted_graph = graph_from_json(header.at("extracted_graph").dump());
      m.extracted_tau = header.at("extracted_tau").get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model header: ") + e.what());
  }
}

std::string content_hash(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void save_model(const AnyModel& m, const std::filesystem::path& path) { write_file(path, serialize_model(m)); }

AnyModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace fedngm
