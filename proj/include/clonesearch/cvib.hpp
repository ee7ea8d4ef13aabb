#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace clonesearch {

// One-hot architecture and optimization indicators. All-zero means absent,
// which is what inference always passes.
struct ConditionLabels {
  Eigen::VectorXd arch;
  Eigen::VectorXd opt;

  static ConditionLabels absent(size_t n_arch, size_t n_opt);
  static ConditionLabels one_hot(size_t n_arch, size_t n_opt, std::optional<size_t> arch_index,
                                 std::optional<size_t> opt_index);
  Eigen::VectorXd concat() const;
};

struct GaussianParams {
  Eigen::VectorXd mu;
  Eigen::VectorXd log_sigma;
};

struct Encoding {
  Eigen::VectorXd z;
  GaussianParams posterior;
  Eigen::VectorXd eps;
};

// Conditional variational bottleneck. The encoder sees [E, l_a, l_o]; the
// decoder sees only z; the prior is an affine map of the conditions whose
// bias is the unconditional component.
struct CvibModel {
  size_t input_dim = 0;
  size_t n_arch = 0;
  size_t n_opt = 0;
  size_t latent_dim = 0;

  Eigen::MatrixXd enc_mu_w, enc_ls_w;  // latent x (input + n_arch + n_opt)
  Eigen::VectorXd enc_mu_b, enc_ls_b;
  Eigen::MatrixXd dec_w;  // input x latent
  Eigen::VectorXd dec_b;
  Eigen::MatrixXd prior_mu_w, prior_ls_w;  // latent x (n_arch + n_opt)
  Eigen::VectorXd prior_mu_b, prior_ls_b;

  // Prior starts at N(0, I); encoder weights are seeded, log-sigma head starts
  // at the constant posterior_log_sigma.
  static CvibModel init(size_t input_dim, size_t n_arch, size_t n_opt, size_t latent_dim, uint64_t seed,
                        double posterior_log_sigma = 0.0);
  size_t condition_dim() const { return n_arch + n_opt; }
};

GaussianParams encode(const Eigen::VectorXd& embedding, const ConditionLabels& cond, const CvibModel& model);
Encoding reparameterize(const GaussianParams& params, const Eigen::VectorXd& eps);
Eigen::VectorXd decode(const Eigen::VectorXd& z, const CvibModel& model);
GaussianParams prior(const ConditionLabels& cond, const CvibModel& model);

// KL(post || prior) for diagonal Gaussians, summed over dimensions.
double kl_gaussian(const GaussianParams& post, const GaussianParams& prior);

struct CvibLoss {
  double total = 0.0;
  double kl_part = 0.0;
  double recon_part = 0.0;
};

// Means over the pair: recon = mean ||E_n - Ehat_n||^2, kl = mean KL_n,
// total = recon + beta2 * kl.
CvibLoss cvib_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b, const Encoding& enc_a,
                   const Encoding& enc_b, const Eigen::VectorXd& recon_a, const Eigen::VectorXd& recon_b,
                   const GaussianParams& prior_a, const GaussianParams& prior_b, double beta2);

}  // namespace clonesearch
