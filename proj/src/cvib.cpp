#include "clonesearch/cvib.hpp"

#include <cmath>

#include "clonesearch/util.hpp"

namespace clonesearch {

ConditionLabels ConditionLabels::absent(size_t n_arch, size_t n_opt) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_arch)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_opt))};
}

ConditionLabels ConditionLabels::one_hot(size_t n_arch, size_t n_opt, std::optional<size_t> arch_index,
                                         std::optional<size_t> opt_index) {
  ConditionLabels c = absent(n_arch, n_opt);
  if (arch_index) {
    if (*arch_index >= n_arch) throw domain_error("architecture index outside condition vocabulary");
    c.arch(static_cast<Eigen::Index>(*arch_index)) = 1.0;
  }
  if (opt_index) {
    if (*opt_index >= n_opt) throw domain_error("optimization index outside condition vocabulary");
    c.opt(static_cast<Eigen::Index>(*opt_index)) = 1.0;
  }
  return c;
}

Eigen::VectorXd ConditionLabels::concat() const {
  Eigen::VectorXd v(arch.size() + opt.size());
  v << arch, opt;
  return v;
}

CvibModel CvibModel::init(size_t input_dim, size_t n_arch, size_t n_opt, size_t latent_dim, uint64_t seed,
                          double posterior_log_sigma) {
  CvibModel m;
  m.input_dim = input_dim;
  m.n_arch = n_arch;
  m.n_opt = n_opt;
  m.latent_dim = latent_dim;
  const auto L = static_cast<Eigen::Index>(latent_dim);
  const auto D = static_cast<Eigen::Index>(input_dim);
  const auto C = static_cast<Eigen::Index>(n_arch + n_opt);
  Rng rng(derive_seed(seed, "cvib"));
  auto gaussian = [&](Eigen::Index rows, Eigen::Index cols, double scale) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.normal() * scale;
    }
    return w;
  };
  m.enc_mu_w = gaussian(L, D + C, 1.0 / std::sqrt(static_cast<double>(D)));
  m.enc_mu_b = Eigen::VectorXd::Zero(L);
  m.enc_ls_w = Eigen::MatrixXd::Zero(L, D + C);
  m.enc_ls_b = Eigen::VectorXd::Constant(L, posterior_log_sigma);
  m.dec_w = gaussian(D, L, 1.0 / std::sqrt(static_cast<double>(L)));
  m.dec_b = Eigen::VectorXd::Zero(D);
  m.prior_mu_w = Eigen::MatrixXd::Zero(L, C);
  m.prior_ls_w = Eigen::MatrixXd::Zero(L, C);
  m.prior_mu_b = Eigen::VectorXd::Zero(L);
  m.prior_ls_b = Eigen::VectorXd::Zero(L);
  return m;
}

namespace {

void check_cond(const ConditionLabels& cond, const CvibModel& model) {
  if (static_cast<size_t>(cond.arch.size()) != model.n_arch || static_cast<size_t>(cond.opt.size()) != model.n_opt) {
    throw config_error("condition vectors do not match the model's condition vocabularies");
  }
}

}  // namespace

GaussianParams encode(const Eigen::VectorXd& embedding, const ConditionLabels& cond, const CvibModel& model) {
  if (static_cast<size_t>(embedding.size()) != model.input_dim) {
    throw config_error("CVIB encoder expects input dimension " + std::to_string(model.input_dim) + ", got " +
                       std::to_string(embedding.size()));
  }
  check_cond(cond, model);
  Eigen::VectorXd u(embedding.size() + static_cast<Eigen::Index>(model.condition_dim()));
  u << embedding, cond.arch, cond.opt;
  return {model.enc_mu_w * u + model.enc_mu_b, model.enc_ls_w * u + model.enc_ls_b};
}

Encoding reparameterize(const GaussianParams& params, const Eigen::VectorXd& eps) {
  if (eps.size() != params.mu.size()) throw domain_error("reparameterize: noise dimension mismatch");
  Encoding e;
  e.posterior = params;
  e.eps = eps;
  e.z = params.mu + (params.log_sigma.array().exp() * eps.array()).matrix();
  return e;
}

Eigen::VectorXd decode(const Eigen::VectorXd& z, const CvibModel& model) {
  if (static_cast<size_t>(z.size()) != model.latent_dim) throw config_error("CVIB decoder latent dimension mismatch");
  return model.dec_w * z + model.dec_b;
}

GaussianParams prior(const ConditionLabels& cond, const CvibModel& model) {
  check_cond(cond, model);
  Eigen::VectorXd c = cond.concat();
  return {model.prior_mu_w * c + model.prior_mu_b, model.prior_ls_w * c + model.prior_ls_b};
}

double kl_gaussian(const GaussianParams& q, const GaussianParams& p) {
  if (q.mu.size() != p.mu.size()) throw domain_error("kl_gaussian: dimension mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < q.mu.size(); ++i) {
    const double d = q.mu(i) - p.mu(i);
    const double var_ratio = std::exp(2.0 * (q.log_sigma(i) - p.log_sigma(i)));
    kl += p.log_sigma(i) - q.log_sigma(i) + 0.5 * (var_ratio + d * d * std::exp(-2.0 * p.log_sigma(i))) - 0.5;
  }
  return kl;
}

CvibLoss cvib_loss(const Eigen::VectorXd& e_a, const Eigen::VectorXd& e_b, const Encoding& enc_a,
                   const Encoding& enc_b, const Eigen::VectorXd& recon_a, const Eigen::VectorXd& recon_b,
                   const GaussianParams& prior_a, const GaussianParams& prior_b, double beta2) {
  CvibLoss l;
  l.recon_part = 0.5 * ((e_a - recon_a).squaredNorm() + (e_b - recon_b).squaredNorm());
  l.kl_part = 0.5 * (kl_gaussian(enc_a.posterior, prior_a) + kl_gaussian(enc_b.posterior, prior_b));
  l.total = l.recon_part + beta2 * l.kl_part;
  return l;
}

}  // namespace clonesearch
