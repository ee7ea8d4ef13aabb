#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clonesearch/config.hpp"
#include "clonesearch/corpus.hpp"
#include "clonesearch/cvib.hpp"
#include "clonesearch/encoder.hpp"
#include "clonesearch/removal.hpp"

namespace clonesearch {

// Everything a forward pass needs: the text encoder, the removal agent, the
// bottleneck, and the condition vocabularies the bottleneck was built for.
struct Model {
  TrainConfig config;  // resolved: k and latent_dim are never 0 here
  std::vector<std::string> arch_vocab;
  std::vector<std::string> opt_vocab;
  EncoderBackend backend;
  RemovalAgent agent;
  CvibModel cvib;
  uint64_t step = 0;

  static Model init(TrainConfig config, std::vector<std::string> arch_vocab, std::vector<std::string> opt_vocab);

  bool embedder_trainable() const { return !config.freeze_embedder; }
  size_t latent_dim() const { return config.enable_cvib ? config.latent_dim : backend.info().dim; }

  // Training-time condition labels for a record's tags; unknown tags are an error.
  ConditionLabels conditions_for(const FunctionMeta& meta) const;
  ConditionLabels absent_conditions() const { return ConditionLabels::absent(arch_vocab.size(), opt_vocab.size()); }
};

// Intermediate values of one side of a pair.
struct SideTrace {
  TokenizedSequence tokens;
  Eigen::MatrixXd token_rows;  // removal only: embeddings of the padded sequence
  std::vector<double> probs;   // removal only
  SelectionResult selection;
  EmbedTrace embed;
  ConditionLabels cond;
  GaussianParams posterior;
  GaussianParams prior;
  Eigen::VectorXd eps;
  Eigen::VectorXd z;
  Eigen::VectorXd recon;
  double recon_error = 0.0;  // ||E - recon||^2
  double kl = 0.0;
};

// Runs one side. eps is the bottleneck noise (zero vector at inference); it
// is ignored when the bottleneck is disabled.
SideTrace forward_side(const Model& model, const TokenizedSequence& tokens, const ConditionLabels& cond,
                       const Eigen::VectorXd& eps);

// Inference path: removal (if enabled), embed, encode with absent conditions
// and eps = 0, so z is the posterior mean. Never reads record metadata.
Eigen::VectorXd infer_encoding(const Model& model, std::string_view instruction_text);
Eigen::VectorXd infer_encoding(const Model& model, const FunctionRecord& record);

// Gradient buffers shaped like the trainable parameters.
struct Gradients {
  Eigen::MatrixXd table;  // empty when the embedder is frozen
  Eigen::MatrixXd dense_weight;
  Eigen::VectorXd dense_bias;
  Eigen::MatrixXd conv_weight;
  double conv_bias = 0.0;
  Eigen::MatrixXd enc_mu_w, enc_ls_w, dec_w, prior_mu_w, prior_ls_w;
  Eigen::VectorXd enc_mu_b, enc_ls_b, dec_b, prior_mu_b, prior_ls_b;

  static Gradients zeros_like(const Model& model);
  void set_zero();
};

// Upstream derivatives for one side, already scaled by batch weights.
struct SideUpstream {
  Eigen::VectorXd dz;   // d loss / d z
  double recon_weight;  // coefficient on ||E - recon||^2
  double kl_weight;     // coefficient on KL(posterior || prior)
  double logp_weight;   // d loss / d log p
};

void backward_side(const Model& model, const SideTrace& trace, const SideUpstream& up, Gradients& grads);

// Flat views of parameters and matching gradients, in the same order.
struct ParamView {
  std::string name;
  std::span<double> values;
  bool trainable;
};
std::vector<ParamView> parameter_views(Model& model);
std::vector<ParamView> gradient_views(const Model& model, Gradients& grads);

}  // namespace clonesearch
