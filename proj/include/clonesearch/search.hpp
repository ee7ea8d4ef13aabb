#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "clonesearch/corpus.hpp"
#include "clonesearch/model.hpp"

namespace clonesearch {

inline constexpr const char* kIndexFormat = "clonesearch-index";
inline constexpr int kIndexVersion = 1;

// max(0, cos(z_a, z_b)).
double sscore(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b);

struct IndexEntry {
  std::string id;
  // informational only; never used for scoring
  std::string name_norm;
  std::string library;
  std::string architecture;
  std::string optimization;

  bool operator==(const IndexEntry&) const = default;
};

struct SearchIndex {
  size_t dim = 0;
  std::string fingerprint;     // of the checkpoint that produced the vectors
  std::vector<IndexEntry> entries;
  std::vector<float> vectors;  // entries.size() x dim, row-major

  size_t size() const { return entries.size(); }
  Eigen::VectorXd vector(size_t row) const;
  bool operator==(const SearchIndex&) const = default;
};

SearchIndex build_index(const Model& model, const std::vector<FunctionRecord>& records);

struct SearchHit {
  size_t rank = 0;  // 1-based
  std::string id;
  std::string name;
  double sscore = 0.0;
};

// Descending sscore, ties by id ascending, at most top_n hits.
std::vector<SearchHit> query(const SearchIndex& index, const Eigen::VectorXd& z, size_t top_n);
// Encodes the text with the model first; the model must match the index fingerprint.
std::vector<SearchHit> query_text(const Model& model, const SearchIndex& index, std::string_view text,
                                  size_t top_n);

// Directory with manifest.json, vectors.f32 (little-endian) and ids.jsonl.
void save_index(const SearchIndex& index, const std::filesystem::path& dir);
SearchIndex load_index(const std::filesystem::path& dir);

}  // namespace clonesearch
