#include "clonesearch/search.hpp"

#include <algorithm>

#include "clonesearch/checkpoint.hpp"
#include "clonesearch/training.hpp"
#include "clonesearch/util.hpp"
#include "json.hpp"

namespace clonesearch {

using nlohmann::json;

double sscore(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b) {
  return std::max(0.0, cosine_similarity(z_a, z_b));
}

Eigen::VectorXd SearchIndex::vector(size_t row) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (size_t d = 0; d < dim; ++d) v(static_cast<Eigen::Index>(d)) = vectors[row * dim + d];
  return v;
}

SearchIndex build_index(const Model& model, const std::vector<FunctionRecord>& records) {
  SearchIndex index;
  index.dim = model.latent_dim();
  index.fingerprint = model_fingerprint(model);
  index.vectors.reserve(records.size() * index.dim);
  for (const auto& r : records) {
    Eigen::VectorXd z = infer_encoding(model, r);
    for (Eigen::Index d = 0; d < z.size(); ++d) index.vectors.push_back(static_cast<float>(z(d)));
    index.entries.push_back({r.id, r.name_norm, r.library, r.architecture, r.optimization});
  }
  return index;
}

std::vector<SearchHit> query(const SearchIndex& index, const Eigen::VectorXd& z, size_t top_n) {
  if (index.size() == 0) throw domain_error("query: the index is empty");
  if (top_n == 0) throw domain_error("query: top_n must be at least 1");
  if (static_cast<size_t>(z.size()) != index.dim) throw domain_error("query: dimension mismatch");
  std::vector<SearchHit> hits;
  hits.reserve(index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    hits.push_back({0, index.entries[i].id, index.entries[i].name_norm, sscore(z, index.vector(i))});
  }
  auto better = [](const SearchHit& a, const SearchHit& b) {
    return a.sscore != b.sscore ? a.sscore > b.sscore : a.id < b.id;
  };
  const size_t n = std::min(top_n, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  for (size_t i = 0; i < n; ++i) hits[i].rank = i + 1;
  return hits;
}

std::vector<SearchHit> query_text(const Model& model, const SearchIndex& index, std::string_view text,
                                  size_t top_n) {
  if (model_fingerprint(model) != index.fingerprint) {
    throw manifest_error("index was built by a different checkpoint");
  }
  return query(index, infer_encoding(model, text), top_n);
}

void save_index(const SearchIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest = {{"format", kIndexFormat},
                   {"version", kIndexVersion},
                   {"dim", index.dim},
                   {"count", index.size()},
                   {"fingerprint", index.fingerprint},
                   {"vectors", "vectors.f32"},
                   {"ids", "ids.jsonl"}};
  std::string blob;
  blob.reserve(index.vectors.size() * 4);
  for (float v : index.vectors) append_le_f32(blob, v);
  std::string ids;
  for (const auto& e : index.entries) {
    ids += json{{"id", e.id},
                {"name", e.name_norm},
                {"library", e.library},
                {"architecture", e.architecture},
                {"optimization", e.optimization}}
               .dump();
    ids += '\n';
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(dir / "vectors.f32", blob);
  write_file(dir / "ids.jsonl", ids);
}

SearchIndex load_index(const std::filesystem::path& dir) {
  SearchIndex index;
  try {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.value("format", "") != kIndexFormat || manifest.value("version", 0) != kIndexVersion) {
      throw manifest_error("not a version " + std::to_string(kIndexVersion) + " index: " + dir.string());
    }
    index.dim = manifest.at("dim").get<size_t>();
    index.fingerprint = manifest.at("fingerprint").get<std::string>();
    const size_t count = manifest.at("count").get<size_t>();
    const std::string ids_text = read_file(dir / "ids.jsonl");
    for (auto line : split_lines(ids_text)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      index.entries.push_back({j.at("id"), j.at("name"), j.at("library"), j.at("architecture"), j.at("optimization")});
    }
    const std::string blob = read_file(dir / "vectors.f32");
    if (index.entries.size() != count || blob.size() != count * index.dim * 4) {
      throw manifest_error("index files disagree with the manifest count");
    }
    index.vectors.resize(count * index.dim);
    for (size_t i = 0; i < index.vectors.size(); ++i) index.vectors[i] = read_le_f32(blob.data() + 4 * i);
  } catch (const json::exception& e) {
    throw manifest_error("index: " + std::string(e.what()));
  }
  return index;
}

}  // namespace clonesearch
