#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clonesearch/corpus.hpp"
#include "json.hpp"

namespace clonesearch {

inline constexpr const char* kSynthManifestFormat = "clonesearch-synth";

// Stand-in for a multi-toolchain build: every base function is rendered once
// per (architecture, optimization) cell. Architectures rename mnemonics and
// registers; optimization levels splice junk instructions and duplicate blocks.
struct SynthArchitecture {
  std::string name;
  std::map<std::string, std::string> mnemonic_map;  // must permute a subset of the alphabet
  std::map<std::string, std::string> register_map;
};

struct SynthOptimization {
  std::string name;
  double junk_rate = 0.0;  // chance of a junk instruction after each instruction
  double dup_rate = 0.0;   // chance of repeating each block
  std::string name_suffix;  // e.g. ".isra.0", exercising name normalization
};

struct SyntheticSpec {
  size_t n_base_functions = 40;
  std::vector<std::string> libraries{"synlib0", "synlib1", "synlib2", "synlib3"};
  std::vector<std::string> mnemonics;
  std::vector<std::string> registers;
  std::vector<std::string> junk_pool;  // instructions over the same alphabets
  std::vector<SynthArchitecture> architectures;
  std::vector<SynthOptimization> optimizations;
  size_t min_blocks = 10;
  size_t max_blocks = 16;
  size_t min_block_len = 2;
  size_t max_block_len = 6;
  uint64_t seed = 0;

  // 40 functions, 4 libraries, 4 architectures, 3 optimization levels.
  static SyntheticSpec defaults();
  // Throws Error("spec") on a non-bijective map or inconsistent sizes.
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SynthFile {
  std::string file;  // relative to the output directory
  std::string library;
  std::string architecture;
  std::string optimization;
};

struct SynthOutput {
  std::vector<SynthFile> files;
  std::vector<std::string> arch_vocab;
  std::vector<std::string> opt_vocab;
  std::vector<std::string> lib_vocab;

  nlohmann::json to_json() const;
  static SynthOutput from_json(const nlohmann::json& j);
};

// Export-schema text of every cell, keyed like SynthFile::file. Pure in spec.
std::map<std::string, std::string> synthesize(const SyntheticSpec& spec, SynthOutput* layout);

// Writes the export files plus manifest.json into dir.
SynthOutput write_synthetic_corpus(const SyntheticSpec& spec, const std::filesystem::path& dir);

// Ingests every synthesized cell in memory, in layout order, exactly as the
// CLI does from a written corpus.
CorpusStore synthetic_corpus(const SyntheticSpec& spec, const IngestOptions& options = {});

}  // namespace clonesearch
