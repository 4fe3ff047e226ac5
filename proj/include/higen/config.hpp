// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "higen/model.hpp"
#include "higen/types.hpp"

namespace higen {

struct TrainConfig {
  double lambda1 = 0.05;        // metric-regression loss weight
  double lambda2 = 1e-4;        // KL loss weight
  double learning_rate = 1e-4;
  double weight_decay = 0.05;
  int batch_size = 64;
  int steps = 2000;
  std::uint64_t seed = 1;
  bool use_maer = true;
  bool use_ambiguity = true;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int latent_dim = 8;
  int log_interval = 50;

  ModelConfig model_config() const {
    ModelConfig m;
    m.d_model = d_model;
    m.n_layers = n_layers;
    m.n_heads = n_heads;
    m.d_ff = d_ff;
    m.latent_dim = latent_dim;
    m.seed = seed;
    return m;
  }

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0)
      throw ConfigError("lambda1 and lambda2 must be >= 0");
    if (use_maer && batch_size < 2)
      throw ConfigError(
          "batch_size must be >= 2 when use_maer is set "
          "(kernel regression needs at least 2 points)");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (d_model % n_heads != 0)
      throw ConfigError("d_model must be divisible by n_heads");
    if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"learning_rate", c.learning_rate},
      {"weight_decay", c.weight_decay},
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"seed", c.seed},
      {"use_maer", c.use_maer},
      {"use_ambiguity", c.use_ambiguity},
      {"d_model", c.d_model},
      {"n_layers", c.n_layers},
      {"n_heads", c.n_heads},
      {"d_ff", c.d_ff},
      {"latent_dim", c.latent_dim},
      {"log_interval", c.log_interval}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "lambda1") c.lambda1 = value.get<double>();
    else if (key == "lambda2") c.lambda2 = value.get<double>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "steps") c.steps = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "use_maer") c.use_maer = value.get<bool>();
    else if (key == "use_ambiguity") c.use_ambiguity = value.get<bool>();
    else if (key == "d_model") c.d_model = value.get<int>();
    else if (key == "n_layers") c.n_layers = value.get<int>();
    else if (key == "n_heads") c.n_heads = value.get<int>();
    else if (key == "d_ff") c.d_ff = value.get<int>();
    else if (key == "latent_dim") c.latent_dim = value.get<int>();
    else if (key == "log_interval") c.log_interval = value.get<int>();
    else
      throw ConfigError("unknown config key: " + key);
  }
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return train_config_from_json(j);
}

}  // namespace higen
