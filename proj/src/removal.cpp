#include "clonesearch/removal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "clonesearch/util.hpp"

namespace clonesearch {

RemovalAgent RemovalAgent::init(size_t dim, uint64_t seed) {
  RemovalAgent a;
  Rng rng(derive_seed(seed, "removal-agent"));
  const double scale = 1.0 / std::sqrt(3.0 * static_cast<double>(dim));
  a.conv_weight.resize(3, static_cast<Eigen::Index>(dim));
  for (Eigen::Index o = 0; o < 3; ++o) {
    for (Eigen::Index c = 0; c < a.conv_weight.cols(); ++c) a.conv_weight(o, c) = rng.normal() * scale;
  }
  a.conv_bias = 0.0;
  return a;
}

std::vector<double> conv_logits(const Eigen::MatrixXd& rows, const RemovalAgent& agent) {
  if (rows.cols() != agent.conv_weight.cols()) {
    throw config_error("removal agent expects " + std::to_string(agent.conv_weight.cols()) +
                       " channels, backend provides " + std::to_string(rows.cols()));
  }
  const Eigen::Index n = rows.rows();
  // per-position response of each kernel tap
  Eigen::MatrixXd taps = rows * agent.conv_weight.transpose();  // n x 3
  std::vector<double> logits(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = agent.conv_bias + taps(i, 1);
    if (i > 0) v += taps(i - 1, 0);
    if (i + 1 < n) v += taps(i + 1, 2);
    logits[static_cast<size_t>(i)] = v;
  }
  return logits;
}

std::vector<double> masked_softmax(std::span<const double> logits, std::span<const uint8_t> mask) {
  if (logits.size() != mask.size()) throw domain_error("masked_softmax: length mismatch");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) max_logit = std::max(max_logit, logits[i]);
  }
  std::vector<double> probs(logits.size(), 0.0);
  if (!std::isfinite(max_logit)) throw domain_error("masked_softmax: no live positions");
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

std::vector<double> score_tokens(const TokenizedSequence& tokens, const EncoderBackend& backend,
                                 const RemovalAgent& agent) {
  if (agent.dim() != backend.info().dim) {
    throw config_error("removal agent dimension " + std::to_string(agent.dim()) + " does not match backend D " +
                       std::to_string(backend.info().dim));
  }
  Eigen::MatrixXd rows = backend.token_embed(tokens.token_ids);
  return masked_softmax(conv_logits(rows, agent), tokens.attention_mask);
}

SelectionResult select_topk(std::span<const double> probs, const TokenizedSequence& tokens, size_t k) {
  if (probs.size() != tokens.token_ids.size()) throw domain_error("select_topk: length mismatch");
  std::vector<size_t> live;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (tokens.attention_mask[i]) live.push_back(i);
  }
  SelectionResult sel;
  if (k > live.size()) {
    sel.clamped = true;
    k = live.size();
  }
  std::partial_sort(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(k), live.end(),
                    [&](size_t a, size_t b) { return probs[a] != probs[b] ? probs[a] > probs[b] : a < b; });
  sel.kept_indices.assign(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(sel.kept_indices.begin(), sel.kept_indices.end());
  for (size_t i : sel.kept_indices) {
    sel.kept_ids.push_back(tokens.token_ids[i]);
    sel.kept_mask.push_back(1);
    sel.p += probs[i];
  }
  return sel;
}

SelectionResult truncate_selection(const TokenizedSequence& tokens, size_t k) {
  SelectionResult sel;
  size_t live = tokens.true_length;
  if (k > live) {
    sel.clamped = true;
    k = live;
  }
  for (size_t i = 0; i < k; ++i) {
    sel.kept_indices.push_back(i);
    sel.kept_ids.push_back(tokens.token_ids[i]);
    sel.kept_mask.push_back(1);
  }
  sel.p = 1.0;
  return sel;
}

double reward(double cosine_loss, double eps_guard) {
  if (cosine_loss < 0.0) throw domain_error("reward: negative cosine loss");
  return 1.0 / (cosine_loss + eps_guard);
}

double rl_loss(double p_a, double p_b, double reward_value) {
  if (!(p_a > 0.0) || !(p_b > 0.0)) throw domain_error("rl_loss: selection probability must be positive");
  return -std::log(p_a) * std::log(p_b) * reward_value;
}

std::vector<double> log_p_logit_grad(std::span<const double> probs, const SelectionResult& sel) {
  std::vector<double> g(probs.size());
  for (size_t j = 0; j < probs.size(); ++j) g[j] = -probs[j];
  for (size_t i : sel.kept_indices) g[i] += probs[i] / sel.p;
  // g[j] = P_j (1[j kept] / p - 1), i.e. P_j (1[j kept] - p) / p
  return g;
}

}  // namespace clonesearch
