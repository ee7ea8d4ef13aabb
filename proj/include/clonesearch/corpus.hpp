#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clonesearch {

inline constexpr size_t kMinBlocks = 10;
inline constexpr const char* kCorpusFormat = "pluvio-corpus";
inline constexpr int kCorpusVersion = 1;

struct Block {
  uint64_t address = 0;
  uint32_t call_order = 0;
  // mnemonic + operands, whitespace collapsed to single spaces
  std::vector<std::string> instructions;

  bool operator==(const Block&) const = default;
};

struct FunctionMeta {
  std::string library;
  std::string architecture;
  std::string optimization;
};

struct FunctionRecord {
  std::string id;
  std::string source_path;
  std::string library;
  std::string architecture;
  std::string optimization;
  std::string name_raw;
  std::string name_norm;
  std::vector<Block> blocks;
  std::string instruction_sequence;

  FunctionMeta meta() const { return {library, architecture, optimization}; }
  bool operator==(const FunctionRecord&) const = default;
};

struct Vocabularies {
  std::vector<std::string> arch;
  std::vector<std::string> opt;
  std::vector<std::string> lib;

  // ARM, AMD64, x86, MIPS, PowerPC / O0..O3 / no libraries yet.
  static Vocabularies defaults();

  std::optional<size_t> arch_index(std::string_view tag) const;
  std::optional<size_t> opt_index(std::string_view tag) const;
  bool has_lib(std::string_view tag) const;

  bool operator==(const Vocabularies&) const = default;
};

// Name normalization rules. Leading underscores are stripped and every suffix
// pattern is removed repeatedly until nothing changes.
struct NameRules {
  bool strip_leading_underscores = true;
  std::vector<std::string> suffix_patterns = {
      R"(\.isra\.[0-9]+$)", R"(\.part\.[0-9]+$)", R"(\.constprop\.[0-9]+$)", R"(\.cold$)"};
};

std::string normalize_name(std::string_view raw, const NameRules& rules = {});

// Flattens blocks into one instruction string, ordered by (call_order, address).
std::string file2ins(std::span<const Block> blocks);

class CorpusStore {
 public:
  CorpusStore() : vocab_(Vocabularies::defaults()) {}
  explicit CorpusStore(Vocabularies vocab) : vocab_(std::move(vocab)) {}

  // Validates id uniqueness and vocabulary membership. Unknown libraries are
  // appended to the library vocabulary; unknown arch/opt tags are rejected.
  void add(FunctionRecord record);

  const std::vector<FunctionRecord>& records() const { return records_; }
  const Vocabularies& vocab() const { return vocab_; }
  const FunctionRecord& get(std::string_view id) const;
  const FunctionRecord* find(std::string_view id) const;
  size_t size() const { return records_.size(); }

  bool operator==(const CorpusStore& other) const {
    return vocab_ == other.vocab_ && records_ == other.records_;
  }

 private:
  Vocabularies vocab_;
  std::vector<FunctionRecord> records_;
  std::unordered_map<std::string, size_t> by_id_;
};

struct IngestOptions {
  size_t min_blocks = kMinBlocks;
  // Drop repeated (path, name) functions within one export.
  bool dedupe = false;
  NameRules name_rules;
};

struct IngestResult {
  std::vector<FunctionRecord> records;
  size_t skipped_small = 0;
  size_t skipped_duplicate = 0;
};

// Parses the JSON-lines export schema (optionally gzip'd).
IngestResult ingest_export(const std::filesystem::path& path, const FunctionMeta& meta,
                           const Vocabularies& vocab, const IngestOptions& options = {});
IngestResult ingest_export_text(std::string_view text, std::string_view source_label,
                                const FunctionMeta& meta, const Vocabularies& vocab,
                                const IngestOptions& options = {});

// Parses one export-schema object into blocks without any size filtering.
struct ExportFunction {
  std::string path;
  std::string name;
  std::vector<Block> blocks;
};
std::vector<ExportFunction> parse_export_text(std::string_view text, std::string_view source_label);

void save_corpus(const CorpusStore& store, const std::filesystem::path& path);
CorpusStore load_corpus(const std::filesystem::path& path);

}  // namespace clonesearch
