#include <gtest/gtest.h>

#include "clonesearch/encoder.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace clonesearch;
using namespace clonesearch::testing;

namespace {

EncoderBackend small_backend(size_t max_length = 16, size_t k_limit = 8) {
  CompactOptions o;
  o.dim = 6;
  o.max_length = max_length;
  o.k_limit = k_limit;
  o.vocab_size = 50;
  o.seed = 4;
  return EncoderBackend::compact(o);
}

// A 10-token WordPiece vocabulary with a 3-dim table, dense layer omitted.
std::filesystem::path write_wordpiece_weights() {
  auto dir = temp_dir("wordpiece");
  const std::vector<std::string> vocab{"[PAD]", "[UNK]", "mov", "r", "##1", "##2", ",", "add", "0x", "##ff"};
  std::string vocab_text;
  for (const auto& v : vocab) vocab_text += v + "\n";
  write_file(dir / "vocab.txt", vocab_text);
  std::string blob;
  for (size_t r = 0; r < vocab.size(); ++r) {
    for (size_t c = 0; c < 3; ++c) append_le_f32(blob, static_cast<float>(r) + 0.25f * static_cast<float>(c));
  }
  write_file(dir / "table.bin", blob);
  nlohmann::json m = {{"backend", "pretrained-text"},
                      {"D", 3},
                      {"LS_max", 12},
                      {"k_limit", 8},
                      {"vocab_size", vocab.size()},
                      {"pad_id", 0},
                      {"tokenizer", {{"type", "wordpiece"}, {"vocab_file", "vocab.txt"}, {"unk_token", "[UNK]"}, {"lowercase", true}}},
                      {"tensors", {{"token_embedding", {{"file", "table.bin"}, {"shape", {vocab.size(), 3}}, {"dtype", "float32"}}}}}};
  write_file(dir / "manifest.json", m.dump());
  return dir;
}

}  // namespace

TEST(PreTokenize, SplitsWordsAndPunctuation) {
  EXPECT_EQ(pre_tokenize("mov r0, [sp+0x10]"),
            (std::vector<std::string>{"mov", "r0", ",", "[", "sp", "+", "0x10", "]"}));
  EXPECT_TRUE(pre_tokenize("  \t ").empty());
}

TEST(Tokenize, EmptyTextIsAnError) {
  auto b = small_backend();
  EXPECT_THROW(b.tokenize(""), Error);
  EXPECT_THROW(b.tokenize("   "), Error);
}

TEST(Tokenize, DeterministicAndPadded) {
  auto b = small_backend();
  auto t = b.tokenize("mov r0, r1");
  EXPECT_EQ(t, b.tokenize("mov r0, r1"));
  EXPECT_EQ(t.true_length, 4u);
  ASSERT_EQ(t.token_ids.size(), 16u);
  for (size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(t.attention_mask[i], i < 4 ? 1 : 0);
    if (i >= 4) EXPECT_EQ(t.token_ids[i], b.info().pad_id);
  }
}

TEST(Tokenize, TruncatesAtMaxLength) {
  auto b = small_backend();
  // each "xN" is one word piece, so this text has exactly LS_max + 5 pieces
  std::string text;
  for (size_t i = 0; i < b.info().max_length + 5; ++i) text += "x" + std::to_string(i) + " ";
  ASSERT_EQ(pre_tokenize(text).size(), b.info().max_length + 5);
  auto t = b.tokenize(text);
  EXPECT_EQ(t.true_length, b.info().max_length);
  EXPECT_EQ(t.token_ids.size(), b.info().max_length);
}

TEST(TokenEmbed, RowsComeFromTheTable) {
  auto b = small_backend();
  std::vector<int32_t> ids{7, 0, 7, 0, 12};
  Eigen::MatrixXd rows = b.token_embed(ids);
  EXPECT_EQ(rows.row(0), rows.row(2));
  EXPECT_EQ(rows.row(1), rows.row(3));
  EXPECT_EQ(rows.row(4), b.table.row(12));
  std::vector<int32_t> bad{50};
  EXPECT_THROW(b.token_embed(bad), Error);
}

TEST(TokenEmbed, MatchesRawWeightsDump) {
  auto b = small_backend();
  auto dir = temp_dir("weights_dump");
  b.save(dir);
  const std::string blob = read_file(dir / "token_embedding.bin");
  const int32_t v = 31;
  std::vector<int32_t> ids{v};
  Eigen::MatrixXd row = b.token_embed(ids);
  for (size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(static_cast<float>(row(0, static_cast<Eigen::Index>(c))), read_le_f32(blob.data() + 4 * (v * 6 + c)));
  }
}

TEST(Embed, PadsDoNotChangeTheEmbedding) {
  auto b = small_backend();
  std::vector<int32_t> ids{3, 9, 4};
  std::vector<uint8_t> mask{1, 1, 1};
  Eigen::VectorXd e = b.embed(ids, mask);
  ids.insert(ids.end(), {0, 0, 0});
  mask.insert(mask.end(), {0, 0, 0});
  EXPECT_EQ(b.embed(ids, mask), e);
  // a masked position's id is never read
  ids[4] = 17;
  EXPECT_EQ(b.embed(ids, mask), e);
  EXPECT_EQ(b.embed(ids, mask), b.embed(ids, mask));
}

TEST(Embed, SingleTokenIsTheOneLayerTransform) {
  auto b = small_backend();
  std::vector<int32_t> ids{21};
  std::vector<uint8_t> mask{1};
  Eigen::VectorXd e = b.embed(ids, mask);
  for (Eigen::Index i = 0; i < 6; ++i) {
    double acc = b.dense_bias(i);
    for (Eigen::Index j = 0; j < 6; ++j) acc += b.dense_weight(i, j) * b.table(21, j);
    EXPECT_NEAR(e(i), std::tanh(acc), 1e-15);
  }
}

TEST(Embed, CapacityError) {
  auto b = small_backend(16, 4);
  std::vector<int32_t> ids{1, 2, 3, 4, 5};
  std::vector<uint8_t> mask{1, 1, 1, 1, 1};
  try {
    b.embed(ids, mask);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "capacity");
  }
  mask[4] = 0;
  EXPECT_NO_THROW(b.embed(ids, mask));
}

TEST(Embed, SharedTableWithTokenEmbed) {
  auto b = small_backend();
  std::vector<int32_t> ids{5, 6};
  std::vector<uint8_t> mask{1, 1};
  Eigen::VectorXd before = b.embed(ids, mask);
  Eigen::MatrixXd rows_before = b.token_embed(ids);
  b.table(6, 2) += 0.5;
  EXPECT_NE(b.embed(ids, mask), before);
  EXPECT_NE(b.token_embed(ids), rows_before);
}

TEST(Embed, DimensionStable) {
  auto b = small_backend();
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    std::vector<int32_t> ids;
    std::vector<uint8_t> mask;
    for (size_t n = 1 + rng.below(8); n > 0; --n) {
      ids.push_back(static_cast<int32_t>(rng.below(50)));
      mask.push_back(1);
    }
    EXPECT_EQ(b.embed(ids, mask).size(), 6);
  }
}

TEST(Backend, SaveLoadKeepsHashTokenizer) {
  auto b = small_backend();
  auto dir = temp_dir("compact_weights");
  b.save(dir);
  auto back = EncoderBackend::load(dir);
  EXPECT_EQ(back.info().dim, 6u);
  EXPECT_EQ(back.tokenize("add r1, 0x3"), b.tokenize("add r1, 0x3"));
  EXPECT_EQ(back.table, b.table.cast<float>().cast<double>());
}

TEST(Backend, WordPieceWeightsDirectory) {
  auto b = EncoderBackend::load(write_wordpiece_weights());
  EXPECT_EQ(b.info().name, "pretrained-text");
  EXPECT_FALSE(b.has_dense());
  auto t = b.tokenize("MOV r1, 0xff r9");
  // mov | r ##1 | , | 0x ##ff | r [UNK]
  EXPECT_EQ(std::vector<int32_t>(t.token_ids.begin(), t.token_ids.begin() + 8),
            (std::vector<int32_t>{2, 3, 4, 6, 8, 9, 1, 0}));
  EXPECT_EQ(t.true_length, 7u);
  // no dense layer: the embedding is the masked mean of table rows
  std::vector<int32_t> ids{2, 4};
  std::vector<uint8_t> mask{1, 1};
  Eigen::VectorXd e = b.embed(ids, mask);
  EXPECT_DOUBLE_EQ(e(0), 3.0);
  EXPECT_DOUBLE_EQ(e(2), 3.5);
}

TEST(Backend, BadManifestIsAManifestError) {
  auto dir = write_wordpiece_weights();
  write_file(dir / "table.bin", "short");
  try {
    EncoderBackend::load(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "manifest");
  }
}
