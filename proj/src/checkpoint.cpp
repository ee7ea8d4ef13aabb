#include "clonesearch/checkpoint.hpp"

#include <map>

#include "clonesearch/util.hpp"
#include "json.hpp"

namespace clonesearch {

using nlohmann::json;

namespace {

bool stores_view(const Model& m, const std::string& name) {
  const bool encoder_tensor = name.rfind("encoder.", 0) == 0;
  return !(encoder_tensor && m.config.backend == "pretrained-text" && m.config.freeze_embedder);
}

}  // namespace

std::string model_fingerprint(const Model& model) {
  Model& m = const_cast<Model&>(model);  // views are only read here
  uint64_t h = fnv1a64(m.config.to_json().dump());
  for (const auto& v : parameter_views(m)) {
    h = fnv1a64(v.name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.values.data()), v.values.size_bytes()), h);
  }
  return hex64(h);
}

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  Model& m = const_cast<Model&>(model);
  json tensors = json::array();
  std::string blob;
  for (const auto& v : parameter_views(m)) {
    if (!stores_view(m, v.name)) continue;
    tensors.push_back({{"name", v.name}, {"count", v.values.size()}, {"offset", blob.size()}});
    for (double x : v.values) append_le_f64(blob, x);
  }
  json manifest = {{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"config", m.config.to_json()},
                   {"arch_vocab", m.arch_vocab},
                   {"opt_vocab", m.opt_vocab},
                   {"dims",
                    {{"D", m.backend.info().dim},
                     {"LS_max", m.backend.info().max_length},
                     {"k", m.config.k},
                     {"d_z", m.latent_dim()},
                     {"vocab_size", m.backend.info().vocab_size}}},
                   {"backend", m.backend.info().name},
                   {"step", m.step},
                   {"tensors", tensors},
                   {"fingerprint", model_fingerprint(m)}};
  std::filesystem::create_directories(dir);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "params.bin", blob);
}

Model load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw manifest_error("checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != kCheckpointFormat || manifest.value("version", 0) != kCheckpointVersion) {
    throw manifest_error("not a version " + std::to_string(kCheckpointVersion) + " checkpoint: " + dir.string());
  }
  Model m;
  try {
    TrainConfig cfg = TrainConfig::from_json(manifest.at("config"));
    m = Model::init(cfg, manifest.at("arch_vocab").get<std::vector<std::string>>(),
                    manifest.at("opt_vocab").get<std::vector<std::string>>());
    m.step = manifest.at("step").get<uint64_t>();
  } catch (const json::exception& e) {
    throw manifest_error("checkpoint manifest: " + std::string(e.what()));
  }
  const std::string blob = read_file(dir / "params.bin");
  std::map<std::string, json> by_name;
  for (const auto& t : manifest.at("tensors")) by_name[t.at("name").get<std::string>()] = t;
  for (auto& v : parameter_views(m)) {
    if (!stores_view(m, v.name)) continue;
    auto it = by_name.find(v.name);
    if (it == by_name.end()) throw manifest_error("checkpoint lacks tensor " + v.name);
    const size_t count = it->second.at("count").get<size_t>();
    const size_t offset = it->second.at("offset").get<size_t>();
    if (count != v.values.size()) throw manifest_error("tensor " + v.name + " has the wrong size");
    if (offset + 8 * count > blob.size()) throw manifest_error("params.bin is truncated");
    for (size_t i = 0; i < count; ++i) v.values[i] = read_le_f64(blob.data() + offset + 8 * i);
  }
  if (model_fingerprint(m) != manifest.value("fingerprint", "")) {
    throw manifest_error("checkpoint fingerprint mismatch in " + dir.string());
  }
  return m;
}

}  // namespace clonesearch
