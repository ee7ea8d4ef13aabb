#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "clonesearch/splits.hpp"
#include "json.hpp"

namespace clonesearch {

struct TrainConfig {
  // [model]
  std::string backend = "compact";  // "compact" or "pretrained-text"
  std::string weights_dir;          // pretrained-text only
  size_t dim = 64;                  // compact only; pretrained reads D from its manifest
  size_t max_length = 256;          // compact only
  size_t vocab_size = 4096;         // compact only
  size_t k = 0;                     // 0: the backend's k_limit
  size_t latent_dim = 0;            // 0: 32 for compact, 256 for pretrained-text
  bool freeze_embedder = true;
  bool enable_removal = true;
  bool enable_cvib = true;
  double posterior_log_sigma_init = 0.0;

  // [loss]
  double beta1 = 0.05;
  double beta2 = 1e-3;
  double eps_guard = 1e-8;

  // [train]
  double learning_rate = 1e-3;
  size_t batch_size = 16;
  size_t epochs = 10;
  uint64_t seed = 0;
  std::string optimizer = "sgd";  // "sgd" or "adam"
  double tau = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct DataConfig {
  std::string corpus;
  SplitConfig splits;
  bool dedupe = false;
};

struct AppConfig {
  DataConfig data;
  TrainConfig train;
};

// INI-style file with [data], [model], [loss] and [train] sections. Every
// TrainConfig field is addressable by its member name; set-valued keys are
// comma separated.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config_text(const std::string& text);
// Applies "section.key=value" style overrides, e.g. {"train.epochs", "5"}.
void apply_override(AppConfig& cfg, const std::string& dotted_key, const std::string& value);

}  // namespace clonesearch
