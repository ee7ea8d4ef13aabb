#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "clonesearch/encoder.hpp"

namespace clonesearch {

// One-step token-removal policy: a width-3 same-padded 1-D convolution from
// the shared token embeddings (dim channels) to one logit per position,
// followed by a softmax over live positions.
struct RemovalAgent {
  // Row o holds the weights applied to position i + o - 1.
  Eigen::MatrixXd conv_weight;  // 3 x dim
  double conv_bias = 0.0;

  static RemovalAgent init(size_t dim, uint64_t seed);
  size_t dim() const { return static_cast<size_t>(conv_weight.cols()); }
  bool operator==(const RemovalAgent& o) const {
    return conv_weight == o.conv_weight && conv_bias == o.conv_bias;
  }
};

struct SelectionResult {
  std::vector<int32_t> kept_ids;
  std::vector<uint8_t> kept_mask;
  std::vector<size_t> kept_indices;  // ascending original positions
  double p = 0.0;                     // summed probability of the kept positions
  bool clamped = false;               // k exceeded the live length
};

// Convolution logits for every position of the padded sequence (pads included).
std::vector<double> conv_logits(const Eigen::MatrixXd& token_rows, const RemovalAgent& agent);

// Softmax over positions whose mask is 1; masked positions get probability 0.
std::vector<double> masked_softmax(std::span<const double> logits, std::span<const uint8_t> mask);

std::vector<double> score_tokens(const TokenizedSequence& tokens, const EncoderBackend& backend,
                                 const RemovalAgent& agent);

// Top-k positions by probability (ties to the lower index), returned in
// original order. k is clamped to the number of live positions.
SelectionResult select_topk(std::span<const double> probs, const TokenizedSequence& tokens, size_t k);

// First min(k, live) tokens; the selection used when removal is disabled.
SelectionResult truncate_selection(const TokenizedSequence& tokens, size_t k);

// R = 1 / (L_cos + eps_guard); callers treat it as a constant.
double reward(double cosine_loss, double eps_guard);

// -(log p_a)(log p_b) R. The beta1 weight is applied by the composite loss.
double rl_loss(double p_a, double p_b, double reward_value);

// Derivative of log p with respect to each logit, for p = sum of the softmax
// probabilities at kept positions: probs[j] * (1[j kept] - p) / p.
std::vector<double> log_p_logit_grad(std::span<const double> probs, const SelectionResult& sel);

}  // namespace clonesearch
