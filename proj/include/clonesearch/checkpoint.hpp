#pragma once

#include <filesystem>
#include <string>

#include "clonesearch/model.hpp"

namespace clonesearch {

inline constexpr const char* kCheckpointFormat = "clonesearch-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// A checkpoint is a directory holding manifest.json (config snapshot,
// condition vocabularies, dimensions, step, parameter table, fingerprint) and
// params.bin (little-endian f64, tensors in manifest order). A frozen
// pretrained embedder is not copied; it is reloaded from weights_dir.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

// Hash over every parameter value and the config, stable across processes.
std::string model_fingerprint(const Model& model);

}  // namespace clonesearch
