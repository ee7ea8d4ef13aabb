#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "clonesearch/corpus.hpp"

namespace clonesearch {

struct PairSample {
  std::string left_id;
  std::string right_id;
  int label = 0;  // 1 iff the two records share a normalized name
  FunctionMeta left_meta;
  FunctionMeta right_meta;
};

inline bool operator==(const FunctionMeta& a, const FunctionMeta& b) {
  return a.library == b.library && a.architecture == b.architecture && a.optimization == b.optimization;
}
inline bool operator==(const PairSample& a, const PairSample& b) {
  return a.left_id == b.left_id && a.right_id == b.right_id && a.label == b.label &&
         a.left_meta == b.left_meta && a.right_meta == b.right_meta;
}

inline constexpr const char* kSplitTrain = "TRAIN";
inline constexpr const char* kSplitOodArch = "OOD-ARCH";
inline constexpr const char* kSplitOodLibs = "OOD-LIBS";
inline constexpr const char* kSplitOodArchLibs = "OOD-ARCH&LIBS";

struct SplitManifest {
  std::string name;
  std::set<std::string> arch_set;
  std::set<std::string> lib_set;
  std::vector<PairSample> pairs;
  uint64_t seed = 0;

  size_t count_label(int label) const;
  bool operator==(const SplitManifest&) const = default;
};

struct PairOptions {
  // When false, both members of every pair share an architecture.
  bool allow_mixed_arch = true;
};

// n_pairs / 2 positives and n_pairs / 2 negatives, deterministic in seed.
std::vector<PairSample> generate_pairs(const std::vector<const FunctionRecord*>& records, size_t n_pairs,
                                       uint64_t seed, const PairOptions& options = {});

struct SplitConfig {
  std::set<std::string> train_archs{"ARM", "AMD64", "x86"};
  std::set<std::string> train_libs{"busybox", "OpenSSL", "sqlite3"};
  std::set<std::string> ood_archs{"PowerPC", "MIPS"};
  std::set<std::string> ood_libs{"putty", "coreutils", "curl", "magick"};
  size_t train_pairs = 2000;
  size_t test_pairs = 500;
  uint64_t seed = 0;
  bool allow_mixed_arch_train = true;
};

// TRAIN, OOD-ARCH, OOD-LIBS, OOD-ARCH&LIBS in that order.
std::vector<SplitManifest> build_splits(const CorpusStore& store, const SplitConfig& cfg);

enum class SubCriterion { kSameArch, kDiffArch, kSameOpt, kDiffOpt };
std::string to_string(SubCriterion c);
SubCriterion sub_criterion_from_string(const std::string& s);

// Pairs matching the criterion, without rebalancing.
std::vector<PairSample> filter_pairs(const SplitManifest& split, SubCriterion criterion);
// Filtered and rebalanced by down-sampling the majority label.
SplitManifest subfilter(const SplitManifest& split, SubCriterion criterion);

std::string split_to_json(const SplitManifest& split);
SplitManifest split_from_json(std::string_view text);
void save_split(const SplitManifest& split, const std::filesystem::path& path);
SplitManifest load_split(const std::filesystem::path& path);
// File-system friendly name, e.g. "OOD-ARCH&LIBS" -> "OOD-ARCH_LIBS".
std::string split_file_stem(const std::string& name);

}  // namespace clonesearch
