#include "clonesearch/encoder.hpp"

#include <cctype>
#include <cmath>

#include "clonesearch/util.hpp"
#include "json.hpp"

namespace clonesearch {

using nlohmann::json;

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> pieces;
  size_t i = 0;
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
    } else if (is_word_char(c)) {
      size_t j = i;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      pieces.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      pieces.emplace_back(1, static_cast<char>(c));
      ++i;
    }
  }
  return pieces;
}

std::vector<int32_t> HashTokenizer::encode(std::string_view text) const {
  std::vector<int32_t> ids;
  for (const auto& piece : pre_tokenize(text)) {
    ids.push_back(static_cast<int32_t>(1 + fnv1a64(piece) % (vocab_size - 1)));
  }
  return ids;
}

WordPieceTokenizer WordPieceTokenizer::from_vocab(std::vector<std::string> vocab, std::string_view unk_token,
                                                  bool lowercase) {
  WordPieceTokenizer t;
  t.vocab = std::move(vocab);
  t.lowercase = lowercase;
  for (size_t i = 0; i < t.vocab.size(); ++i) t.index.emplace(t.vocab[i], static_cast<int32_t>(i));
  auto it = t.index.find(std::string(unk_token));
  if (it == t.index.end()) throw config_error("wordpiece vocabulary lacks unknown token " + std::string(unk_token));
  t.unk_id = it->second;
  return t;
}

std::vector<int32_t> WordPieceTokenizer::encode(std::string_view text) const {
  std::vector<int32_t> ids;
  for (std::string word : pre_tokenize(text)) {
    if (lowercase) {
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (word.size() > max_chars_per_word) {
      ids.push_back(unk_id);
      continue;
    }
    std::vector<int32_t> sub;
    size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      size_t end = word.size();
      int32_t found = -1;
      while (start < end) {
        std::string candidate = word.substr(start, end - start);
        if (start > 0) candidate = "##" + candidate;
        auto it = index.find(candidate);
        if (it != index.end()) {
          found = it->second;
          break;
        }
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      sub.push_back(found);
      start = end;
    }
    if (bad) {
      ids.push_back(unk_id);
    } else {
      ids.insert(ids.end(), sub.begin(), sub.end());
    }
  }
  return ids;
}

EncoderBackend EncoderBackend::compact(const CompactOptions& o) {
  if (o.k_limit > o.max_length) throw config_error("k_limit must not exceed max_length");
  if (o.vocab_size < 2 || o.dim == 0) throw config_error("compact backend needs vocab_size >= 2 and dim > 0");
  EncoderBackend b;
  b.info_ = {"compact", o.dim, o.max_length, o.k_limit, o.vocab_size, 0};
  b.tokenizer_ = HashTokenizer{o.vocab_size};
  Rng rng(derive_seed(o.seed, "compact-encoder"));
  b.table.resize(static_cast<Eigen::Index>(o.vocab_size), static_cast<Eigen::Index>(o.dim));
  for (Eigen::Index r = 0; r < b.table.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.table.cols(); ++c) b.table(r, c) = rng.normal();
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(o.dim));
  b.dense_weight.resize(static_cast<Eigen::Index>(o.dim), static_cast<Eigen::Index>(o.dim));
  for (Eigen::Index r = 0; r < b.dense_weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < b.dense_weight.cols(); ++c) b.dense_weight(r, c) = rng.normal() * scale;
  }
  b.dense_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(o.dim));
  b.has_dense_ = true;
  return b;
}

namespace {

void write_tensor(const std::filesystem::path& file, const Eigen::MatrixXd& m) {
  std::string blob;
  blob.reserve(static_cast<size_t>(m.size()) * 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_le_f32(blob, static_cast<float>(m(r, c)));
  }
  write_file(file, blob);
}

Eigen::MatrixXd read_tensor(const std::filesystem::path& dir, const json& spec, Eigen::Index rows,
                            Eigen::Index cols, const std::string& name) {
  std::vector<int64_t> shape = spec.at("shape").get<std::vector<int64_t>>();
  int64_t want_cols = shape.size() == 2 ? shape[1] : 1;
  if (shape.empty() || shape[0] != rows || want_cols != cols) {
    throw manifest_error("tensor " + name + " has shape inconsistent with manifest dimensions");
  }
  if (spec.value("dtype", "float32") != "float32") throw manifest_error("tensor " + name + ": only float32 blobs");
  std::string blob = read_file(dir / spec.at("file").get<std::string>());
  if (blob.size() != static_cast<size_t>(rows * cols) * 4) {
    throw manifest_error("tensor " + name + ": blob size does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  const char* p = blob.data();
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, p += 4) m(r, c) = read_le_f32(p);
  }
  return m;
}

}  // namespace

void EncoderBackend::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  json tensors;
  write_tensor(dir / "token_embedding.bin", table);
  tensors["token_embedding"] = {
      {"file", "token_embedding.bin"}, {"shape", {info_.vocab_size, info_.dim}}, {"dtype", "float32"}};
  if (has_dense_) {
    write_tensor(dir / "dense_weight.bin", dense_weight);
    write_tensor(dir / "dense_bias.bin", dense_bias);
    tensors["dense.weight"] = {{"file", "dense_weight.bin"}, {"shape", {info_.dim, info_.dim}}, {"dtype", "float32"}};
    tensors["dense.bias"] = {{"file", "dense_bias.bin"}, {"shape", {info_.dim}}, {"dtype", "float32"}};
  }
  json tok;
  if (const auto* wp = std::get_if<WordPieceTokenizer>(&tokenizer_)) {
    std::string vocab_text;
    for (const auto& v : wp->vocab) vocab_text += v + "\n";
    write_file(dir / "vocab.txt", vocab_text);
    tok = {{"type", "wordpiece"},
           {"vocab_file", "vocab.txt"},
           {"unk_token", wp->vocab[static_cast<size_t>(wp->unk_id)]},
           {"lowercase", wp->lowercase}};
  } else {
    tok = {{"type", "hash"}};
  }
  json manifest = {{"backend", info_.name},  {"D", info_.dim},
                   {"LS_max", info_.max_length}, {"k_limit", info_.k_limit},
                   {"vocab_size", info_.vocab_size}, {"pad_id", info_.pad_id},
                   {"tokenizer", tok},           {"tensors", tensors}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

EncoderBackend EncoderBackend::load(const std::filesystem::path& dir) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw manifest_error("weights manifest in " + dir.string() + ": " + e.what());
  }
  EncoderBackend b;
  try {
    b.info_.name = m.at("backend").get<std::string>();
    b.info_.dim = m.at("D").get<size_t>();
    b.info_.max_length = m.at("LS_max").get<size_t>();
    b.info_.k_limit = m.at("k_limit").get<size_t>();
    b.info_.vocab_size = m.at("vocab_size").get<size_t>();
    b.info_.pad_id = m.at("pad_id").get<int32_t>();
    if (b.info_.k_limit > b.info_.max_length) throw manifest_error("k_limit exceeds LS_max");
    if (b.info_.pad_id < 0 || static_cast<size_t>(b.info_.pad_id) >= b.info_.vocab_size) {
      throw manifest_error("pad_id outside vocabulary");
    }
    const json& tok = m.at("tokenizer");
    const std::string type = tok.at("type").get<std::string>();
    if (type == "hash") {
      b.tokenizer_ = HashTokenizer{b.info_.vocab_size};
    } else if (type == "wordpiece") {
      std::vector<std::string> vocab;
      const std::string vocab_text = read_file(dir / tok.at("vocab_file").get<std::string>());
      for (auto line : split_lines(vocab_text)) {
        vocab.emplace_back(line);
      }
      if (vocab.size() != b.info_.vocab_size) throw manifest_error("vocab.txt size differs from vocab_size");
      b.tokenizer_ = WordPieceTokenizer::from_vocab(std::move(vocab), tok.value("unk_token", "[UNK]"),
                                                    tok.value("lowercase", true));
    } else {
      throw manifest_error("unknown tokenizer type " + type);
    }
    const json& tensors = m.at("tensors");
    const auto V = static_cast<Eigen::Index>(b.info_.vocab_size);
    const auto D = static_cast<Eigen::Index>(b.info_.dim);
    b.table = read_tensor(dir, tensors.at("token_embedding"), V, D, "token_embedding");
    b.has_dense_ = tensors.contains("dense.weight");
    if (b.has_dense_) {
      b.dense_weight = read_tensor(dir, tensors.at("dense.weight"), D, D, "dense.weight");
      b.dense_bias = read_tensor(dir, tensors.at("dense.bias"), D, 1, "dense.bias").col(0);
    }
  } catch (const json::exception& e) {
    throw manifest_error("weights manifest in " + dir.string() + ": " + e.what());
  }
  return b;
}

TokenizedSequence EncoderBackend::tokenize(std::string_view text) const {
  if (text.empty()) throw domain_error("tokenize: empty text");
  std::vector<int32_t> ids = std::visit([&](const auto& t) { return t.encode(text); }, tokenizer_);
  if (ids.empty()) throw domain_error("tokenize: text produced no tokens");
  TokenizedSequence seq;
  seq.true_length = std::min(ids.size(), info_.max_length);
  seq.token_ids.assign(info_.max_length, info_.pad_id);
  seq.attention_mask.assign(info_.max_length, 0);
  for (size_t i = 0; i < seq.true_length; ++i) {
    seq.token_ids[i] = ids[i];
    seq.attention_mask[i] = 1;
  }
  return seq;
}

void EncoderBackend::check_id(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= info_.vocab_size) {
    throw domain_error("token id " + std::to_string(id) + " outside vocabulary");
  }
}

Eigen::MatrixXd EncoderBackend::token_embed(std::span<const int32_t> token_ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(token_ids.size()), table.cols());
  for (size_t i = 0; i < token_ids.size(); ++i) {
    check_id(token_ids[i]);
    out.row(static_cast<Eigen::Index>(i)) = table.row(token_ids[i]);
  }
  return out;
}

EmbedTrace EncoderBackend::embed_traced(std::span<const int32_t> token_ids,
                                        std::span<const uint8_t> attention_mask) const {
  if (token_ids.size() != attention_mask.size()) throw domain_error("embed: ids and mask lengths differ");
  EmbedTrace t;
  t.pooled = Eigen::VectorXd::Zero(table.cols());
  for (size_t i = 0; i < token_ids.size(); ++i) {
    if (attention_mask[i] == 0) continue;
    check_id(token_ids[i]);
    t.pooled_ids.push_back(token_ids[i]);
  }
  if (t.pooled_ids.size() > info_.k_limit) {
    throw capacity_error("embed: " + std::to_string(t.pooled_ids.size()) + " unmasked tokens exceed k_limit " +
                         std::to_string(info_.k_limit));
  }
  if (t.pooled_ids.empty()) throw domain_error("embed: no unmasked tokens");
  for (int32_t id : t.pooled_ids) t.pooled += table.row(id).transpose();
  t.pooled /= static_cast<double>(t.pooled_ids.size());
  if (has_dense_) {
    t.output = (dense_weight * t.pooled + dense_bias).array().tanh().matrix();
  } else {
    t.output = t.pooled;
  }
  return t;
}

Eigen::VectorXd EncoderBackend::embed(std::span<const int32_t> token_ids,
                                      std::span<const uint8_t> attention_mask) const {
  return embed_traced(token_ids, attention_mask).output;
}

}  // namespace clonesearch
