#include "fedngm/config.hpp"

#include <fstream>
#include <set>

#include "fedngm/error.hpp"

namespace fedngm {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [k, v] : j.items())
    if (!ok.contains(k)) throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename Fn>
auto guarded(const char* where, Fn fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(where) + ": " + e.what());
  }
}

}  // namespace

nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  return guarded("train config", [&] {
    reject_unknown(j,
                   {"lambda", "lambda_self", "gamma_global", "gamma_sparsity", "learning_rate", "epochs", "batch_size", "seed",
                    "log_epsilon", "init_scale", "ngr_log_scaling", "penalty_per_row", "adam_beta1", "adam_beta2", "adam_epsilon"},
                   "train config");
    read(j, "lambda", c.lambda);
    read(j, "lambda_self", c.lambda_self);
    read(j, "gamma_global", c.gamma_global);
    read(j, "gamma_sparsity", c.gamma_sparsity);
    read(j, "learning_rate", c.learning_rate);
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "seed", c.seed);
    read(j, "log_epsilon", c.log_epsilon);
    read(j, "init_scale", c.init_scale);
    read(j, "ngr_log_scaling", c.ngr_log_scaling);
    read(j, "penalty_per_row", c.penalty_per_row);
    read(j, "adam_beta1", c.adam_beta1);
    read(j, "adam_beta2", c.adam_beta2);
    read(j, "adam_epsilon", c.adam_epsilon);
    c.validate();
    return c;
  });
}

ArchSpec arch_from_json(const nlohmann::json& j, ArchSpec a) {
  return guarded("arch", [&] {
    reject_unknown(j, {"hidden", "activation"}, "arch");
    read(j, "hidden", a.hidden);
    if (j.contains("activation")) a.activation = activation_from_string(j.at("activation"));
    for (auto h : a.hidden)
      if (h < 1) throw ConfigError("arch: hidden widths must be >= 1");
    return a;
  });
}

SamplerConfig sampler_from_json(const nlohmann::json& j, SamplerConfig s) {
  return guarded("sampler", [&] {
    reject_unknown(j, {"burn_in_sweeps", "projection"}, "sampler");
    read(j, "burn_in_sweeps", s.burn_in_sweeps);
    if (j.contains("projection")) {
      const std::string p = j.at("projection");
      if (p == "normalized") s.projection = CategoricalProjection::Normalized;
      else if (p == "softmax") s.projection = CategoricalProjection::Softmax;
      else throw ConfigError("sampler: unknown projection '" + p + "'");
    }
    return s;
  });
}

FederationConfig federation_config_from_json(const nlohmann::json& j, FederationConfig c) {
  return guarded("federation config", [&] {
    reject_unknown(j,
                   {"mode", "weighting", "samples_per_client", "min_clients_k", "arch", "local_train", "global_train",
                    "recovery", "sampler", "seed"},
                   "federation config");
    if (j.contains("mode")) c.mode = model_kind_from_string(j.at("mode"));
    if (j.contains("weighting")) c.weighting = weighting_from_string(j.at("weighting"));
    read(j, "samples_per_client", c.samples_per_client);
    read(j, "min_clients_k", c.min_clients_k);
    read(j, "seed", c.seed);
    if (j.contains("arch")) c.arch = arch_from_json(j.at("arch"), c.arch);
    if (j.contains("local_train")) c.local_train = train_config_from_json(j.at("local_train"), c.local_train);
    if (j.contains("global_train")) c.global_train = train_config_from_json(j.at("global_train"), c.global_train);
    if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"), c.sampler);
    if (j.contains("recovery")) {
      const auto& r = j.at("recovery");
      reject_unknown(r, {"ridge", "threshold"}, "recovery");
      read(r, "ridge", c.recovery.ridge);
      read(r, "threshold", c.recovery.threshold);
    }
    c.validate();
    return c;
  });
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lambda", c.lambda},
          {"lambda_self", c.lambda_self},
          {"gamma_global", c.gamma_global},
          {"gamma_sparsity", c.gamma_sparsity},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"log_epsilon", c.log_epsilon},
          {"init_scale", c.init_scale},
          {"ngr_log_scaling", c.ngr_log_scaling},
          {"penalty_per_row", c.penalty_per_row}};
}

nlohmann::json to_json(const ArchSpec& a) { return {{"hidden", a.hidden}, {"activation", to_string(a.activation)}}; }

nlohmann::json to_json(const FederationConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"weighting", to_string(c.weighting)},
          {"samples_per_client", c.samples_per_client},
          {"min_clients_k", c.min_clients_k},
          {"arch", to_json(c.arch)},
          {"local_train", to_json(c.local_train)},
          {"global_train", to_json(c.global_train)},
          {"recovery", {{"ridge", c.recovery.ridge}, {"threshold", c.recovery.threshold}}},
          {"sampler", {{"burn_in_sweeps", c.sampler.burn_in_sweeps},
                       {"projection", c.sampler.projection == CategoricalProjection::Softmax ? "softmax" : "normalized"}}},
          {"seed", c.seed}};
}

}  // namespace fedngm
