#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace clonesearch {

struct TokenizedSequence {
  std::vector<int32_t> token_ids;      // padded to max_length
  std::vector<uint8_t> attention_mask;  // true_length ones followed by zeros
  size_t true_length = 0;

  bool operator==(const TokenizedSequence&) const = default;
};

// Splits instruction text into word pieces ([A-Za-z0-9_] runs and single
// punctuation characters); whitespace separates and is dropped.
std::vector<std::string> pre_tokenize(std::string_view text);

// Stateless tokenizer for the compact backend: a piece maps to
// 1 + fnv1a64(piece) mod (vocab_size - 1); id 0 is padding.
struct HashTokenizer {
  size_t vocab_size = 4096;

  std::vector<int32_t> encode(std::string_view text) const;
};

// Greedy longest-match-first subword tokenizer over a vocab.txt file, the
// scheme used by BERT/MPNet style sentence encoders.
struct WordPieceTokenizer {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int32_t> index;
  int32_t unk_id = 0;
  bool lowercase = true;
  size_t max_chars_per_word = 100;

  static WordPieceTokenizer from_vocab(std::vector<std::string> vocab, std::string_view unk_token,
                                       bool lowercase);
  std::vector<int32_t> encode(std::string_view text) const;
};

struct BackendInfo {
  std::string name;  // "compact" or "pretrained-text"
  size_t dim = 64;
  size_t max_length = 256;  // tokenizer padding length
  size_t k_limit = 64;      // maximum unmasked tokens accepted by embed
  size_t vocab_size = 4096;
  int32_t pad_id = 0;
};

struct CompactOptions {
  size_t dim = 64;
  size_t max_length = 256;
  size_t k_limit = 64;
  size_t vocab_size = 4096;
  uint64_t seed = 0;
};

// Intermediate values of one embed call, kept for backpropagation.
struct EmbedTrace {
  std::vector<int32_t> pooled_ids;  // unmasked ids in input order
  Eigen::VectorXd pooled;           // masked mean of table rows
  Eigen::VectorXd output;           // the embedding
};

// Text encoder: token table, masked mean pooling, optional tanh dense layer.
// The token table is shared with the removal agent through token_embed.
class EncoderBackend {
 public:
  static EncoderBackend compact(const CompactOptions& options);
  // Loads a weights directory (manifest.json + per-tensor blobs).
  static EncoderBackend load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  const BackendInfo& info() const { return info_; }

  TokenizedSequence tokenize(std::string_view text) const;
  Eigen::MatrixXd token_embed(std::span<const int32_t> token_ids) const;
  Eigen::VectorXd embed(std::span<const int32_t> token_ids, std::span<const uint8_t> attention_mask) const;
  EmbedTrace embed_traced(std::span<const int32_t> token_ids, std::span<const uint8_t> attention_mask) const;

  bool has_dense() const { return has_dense_; }

  // Parameters. Table is vocab_size x dim; dense maps dim -> dim.
  Eigen::MatrixXd table;
  Eigen::MatrixXd dense_weight;
  Eigen::VectorXd dense_bias;

 private:
  BackendInfo info_;
  bool has_dense_ = true;
  std::variant<HashTokenizer, WordPieceTokenizer> tokenizer_;

  void check_id(int32_t id) const;
};

}  // namespace clonesearch
