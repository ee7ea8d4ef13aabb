#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clonesearch/corpus.hpp"
#include "clonesearch/model.hpp"
#include "clonesearch/splits.hpp"
#include "json.hpp"

namespace clonesearch {

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
// (y - cos(z_a, z_b))^2
double cosine_loss(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int label);
// d cos(u, v) / d u
Eigen::VectorXd cosine_grad(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct LossBreakdown {
  double l_cos = 0.0;
  double l_rl = 0.0;
  double l_cvib_total = 0.0;
  double l_cvib_kl = 0.0;
  double l_cvib_recon = 0.0;
  double total = 0.0;
  double reward = 0.0;

  nlohmann::json to_json() const;
};

// Scalar results of one pair's forward pass.
struct PairTerms {
  double l_cos = 0.0;
  double p_a = 1.0;
  double p_b = 1.0;
  double kl_part = 0.0;     // mean of the two KL terms
  double recon_part = 0.0;  // mean of the two reconstruction errors
};

// Batch means of every term; total = L_cos + beta1 * L_RL + recon + beta2 * kl.
// The reward is 1 / (batch-mean L_cos + eps_guard) unless fixed_reward is set.
// Disabled components contribute exactly zero.
LossBreakdown composite_loss(std::span<const PairTerms> pairs, const TrainConfig& cfg,
                             std::optional<double> fixed_reward = std::nullopt);

// One labeled pair ready for the forward pass.
struct PairInput {
  TokenizedSequence left;
  TokenizedSequence right;
  ConditionLabels left_cond;
  ConditionLabels right_cond;
  int label = 0;
  Eigen::VectorXd left_eps;  // bottleneck noise; zero-length when CVIB is off
  Eigen::VectorXd right_eps;
};

struct BatchResult {
  LossBreakdown loss;
  std::vector<PairTerms> terms;
};

// Forward and (when grads is non-null) backward over a batch. The reward is
// treated as a constant.
BatchResult run_batch(const Model& model, std::span<const PairInput> batch, Gradients* grads,
                      std::optional<double> fixed_reward = std::nullopt);

// Updates trainable parameters from accumulated gradients.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(Model& model, Gradients& grads);

 private:
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  uint64_t t_ = 0;
};

struct EpochTelemetry {
  size_t epoch = 0;
  LossBreakdown mean;
  double mean_p = 0.0;
  size_t steps = 0;
};

struct TrainResult {
  Model model;
  std::vector<EpochTelemetry> telemetry;
};

// Telemetry line for one epoch, echoing the loss weights and optimizer.
nlohmann::json telemetry_json(const EpochTelemetry& t, const TrainConfig& cfg);

// Trains on a split. Throws Error("numeric") naming the epoch and batch when a
// loss becomes non-finite.
TrainResult train(const TrainConfig& cfg, const SplitManifest& split, const CorpusStore& corpus,
                  const std::function<void(const EpochTelemetry&)>& on_epoch = {});

// Builds the tokenized, condition-labelled input for one manifest pair.
PairInput make_pair_input(const Model& model, const PairSample& pair, const CorpusStore& corpus);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  size_t checked = 0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> per_parameter;  // max relative error per tensor
};

// Central finite differences against run_batch's analytic gradients for every
// trainable parameter, with the reward and noise held fixed.
GradCheckReport grad_check(Model model, std::span<const PairInput> batch, double step = 1e-5,
                           double tolerance = 1e-3);

// A random tiny problem (compact backend) for grad_check.
struct TinyInstance {
  Model model;
  std::vector<PairInput> batch;
};
TinyInstance make_tiny_instance(TrainConfig cfg, uint64_t seed, size_t n_pairs = 3);

}  // namespace clonesearch
