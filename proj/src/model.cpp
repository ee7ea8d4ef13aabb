#include "clonesearch/model.hpp"

#include <cmath>

#include "clonesearch/util.hpp"

namespace clonesearch {

Model Model::init(TrainConfig config, std::vector<std::string> arch_vocab, std::vector<std::string> opt_vocab) {
  config.validate();
  Model m;
  if (config.backend == "compact") {
    if (config.k == 0) config.k = std::min<size_t>(64, config.max_length);
    CompactOptions opts;
    opts.dim = config.dim;
    opts.max_length = config.max_length;
    opts.k_limit = config.k;
    opts.vocab_size = config.vocab_size;
    opts.seed = config.seed;
    m.backend = EncoderBackend::compact(opts);
    if (config.latent_dim == 0) config.latent_dim = 32;
  } else {
    m.backend = EncoderBackend::load(config.weights_dir);
    if (config.k == 0) config.k = m.backend.info().k_limit;
    if (config.k > m.backend.info().k_limit) throw config_error("k exceeds the backend's k_limit");
    if (config.latent_dim == 0) config.latent_dim = 256;
    // dims of a pretrained backend always come from its manifest
    config.dim = m.backend.info().dim;
    config.max_length = m.backend.info().max_length;
    config.vocab_size = m.backend.info().vocab_size;
  }
  m.config = config;
  m.arch_vocab = std::move(arch_vocab);
  m.opt_vocab = std::move(opt_vocab);
  m.agent = RemovalAgent::init(m.backend.info().dim, config.seed);
  m.cvib = CvibModel::init(m.backend.info().dim, m.arch_vocab.size(), m.opt_vocab.size(), config.latent_dim,
                           config.seed, config.posterior_log_sigma_init);
  return m;
}

ConditionLabels Model::conditions_for(const FunctionMeta& meta) const {
  auto find = [](const std::vector<std::string>& v, const std::string& tag, const char* what) {
    for (size_t i = 0; i < v.size(); ++i) {
      if (v[i] == tag) return i;
    }
    throw vocabulary_error(std::string("unknown ") + what + " tag '" + tag + "' for this model");
  };
  return ConditionLabels::one_hot(arch_vocab.size(), opt_vocab.size(), find(arch_vocab, meta.architecture, "architecture"),
                                  find(opt_vocab, meta.optimization, "optimization"));
}

SideTrace forward_side(const Model& model, const TokenizedSequence& tokens, const ConditionLabels& cond,
                       const Eigen::VectorXd& eps) {
  SideTrace t;
  t.tokens = tokens;
  t.cond = cond;
  if (model.config.enable_removal) {
    t.token_rows = model.backend.token_embed(tokens.token_ids);
    t.probs = masked_softmax(conv_logits(t.token_rows, model.agent), tokens.attention_mask);
    t.selection = select_topk(t.probs, tokens, model.config.k);
  } else {
    t.selection = truncate_selection(tokens, model.config.k);
  }
  t.embed = model.backend.embed_traced(t.selection.kept_ids, t.selection.kept_mask);
  const Eigen::VectorXd& e = t.embed.output;
  if (model.config.enable_cvib) {
    t.posterior = encode(e, cond, model.cvib);
    t.prior = prior(cond, model.cvib);
    t.eps = eps;
    t.z = reparameterize(t.posterior, eps).z;
    t.recon = decode(t.z, model.cvib);
    t.recon_error = (e - t.recon).squaredNorm();
    t.kl = kl_gaussian(t.posterior, t.prior);
  } else {
    t.z = e;
  }
  return t;
}

Eigen::VectorXd infer_encoding(const Model& model, std::string_view instruction_text) {
  TokenizedSequence tokens = model.backend.tokenize(instruction_text);
  Eigen::VectorXd eps = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.latent_dim()));
  return forward_side(model, tokens, model.absent_conditions(), eps).z;
}

Eigen::VectorXd infer_encoding(const Model& model, const FunctionRecord& record) {
  return infer_encoding(model, record.instruction_sequence);
}

Gradients Gradients::zeros_like(const Model& model) {
  Gradients g;
  if (model.embedder_trainable()) {
    g.table = Eigen::MatrixXd::Zero(model.backend.table.rows(), model.backend.table.cols());
    g.dense_weight = Eigen::MatrixXd::Zero(model.backend.dense_weight.rows(), model.backend.dense_weight.cols());
    g.dense_bias = Eigen::VectorXd::Zero(model.backend.dense_bias.size());
  }
  g.conv_weight = Eigen::MatrixXd::Zero(model.agent.conv_weight.rows(), model.agent.conv_weight.cols());
  const CvibModel& c = model.cvib;
  g.enc_mu_w = Eigen::MatrixXd::Zero(c.enc_mu_w.rows(), c.enc_mu_w.cols());
  g.enc_ls_w = Eigen::MatrixXd::Zero(c.enc_ls_w.rows(), c.enc_ls_w.cols());
  g.dec_w = Eigen::MatrixXd::Zero(c.dec_w.rows(), c.dec_w.cols());
  g.prior_mu_w = Eigen::MatrixXd::Zero(c.prior_mu_w.rows(), c.prior_mu_w.cols());
  g.prior_ls_w = Eigen::MatrixXd::Zero(c.prior_ls_w.rows(), c.prior_ls_w.cols());
  g.enc_mu_b = Eigen::VectorXd::Zero(c.enc_mu_b.size());
  g.enc_ls_b = Eigen::VectorXd::Zero(c.enc_ls_b.size());
  g.dec_b = Eigen::VectorXd::Zero(c.dec_b.size());
  g.prior_mu_b = Eigen::VectorXd::Zero(c.prior_mu_b.size());
  g.prior_ls_b = Eigen::VectorXd::Zero(c.prior_ls_b.size());
  return g;
}

void Gradients::set_zero() {
  table.setZero();
  dense_weight.setZero();
  dense_bias.setZero();
  conv_weight.setZero();
  conv_bias = 0.0;
  enc_mu_w.setZero();
  enc_ls_w.setZero();
  dec_w.setZero();
  prior_mu_w.setZero();
  prior_ls_w.setZero();
  enc_mu_b.setZero();
  enc_ls_b.setZero();
  dec_b.setZero();
  prior_mu_b.setZero();
  prior_ls_b.setZero();
}

void backward_side(const Model& model, const SideTrace& t, const SideUpstream& up, Gradients& g) {
  const Eigen::VectorXd& e = t.embed.output;
  const auto D = e.size();
  Eigen::VectorXd de;

  if (model.config.enable_cvib) {
    const CvibModel& c = model.cvib;
    // reconstruction ||e - recon||^2
    Eigen::VectorXd diff = e - t.recon;
    Eigen::VectorXd d_recon = -2.0 * up.recon_weight * diff;
    Eigen::VectorXd de_direct = 2.0 * up.recon_weight * diff;
    g.dec_w += d_recon * t.z.transpose();
    g.dec_b += d_recon;
    Eigen::VectorXd dz = up.dz + c.dec_w.transpose() * d_recon;

    // KL(N(mu, s^2) || N(mu_p, s_p^2)) per dimension
    const Eigen::ArrayXd mu = t.posterior.mu.array();
    const Eigen::ArrayXd ls = t.posterior.log_sigma.array();
    const Eigen::ArrayXd mu_p = t.prior.mu.array();
    const Eigen::ArrayXd ls_p = t.prior.log_sigma.array();
    const Eigen::ArrayXd inv_var_p = (-2.0 * ls_p).exp();
    const Eigen::ArrayXd var = (2.0 * ls).exp();
    const Eigen::ArrayXd delta = mu - mu_p;
    Eigen::VectorXd dmu_kl = (up.kl_weight * delta * inv_var_p).matrix();
    Eigen::VectorXd dls_kl = (up.kl_weight * (var * inv_var_p - 1.0)).matrix();
    Eigen::VectorXd dmu_p = -dmu_kl;
    Eigen::VectorXd dls_p = (up.kl_weight * (1.0 - (var + delta.square()) * inv_var_p)).matrix();

    Eigen::VectorXd dmu = dz + dmu_kl;
    Eigen::VectorXd dls = (dz.array() * ls.exp() * t.eps.array()).matrix() + dls_kl;

    Eigen::VectorXd u(D + static_cast<Eigen::Index>(c.condition_dim()));
    u << e, t.cond.arch, t.cond.opt;
    g.enc_mu_w += dmu * u.transpose();
    g.enc_mu_b += dmu;
    g.enc_ls_w += dls * u.transpose();
    g.enc_ls_b += dls;
    Eigen::VectorXd du = c.enc_mu_w.transpose() * dmu + c.enc_ls_w.transpose() * dls;
    de = du.head(D) + de_direct;

    Eigen::VectorXd cond = t.cond.concat();
    g.prior_mu_w += dmu_p * cond.transpose();
    g.prior_mu_b += dmu_p;
    g.prior_ls_w += dls_p * cond.transpose();
    g.prior_ls_b += dls_p;
  } else {
    de = up.dz;
  }

  const bool embed_grads = model.embedder_trainable();
  if (embed_grads) {
    Eigen::VectorXd dpooled;
    if (model.backend.has_dense()) {
      Eigen::VectorXd da = (de.array() * (1.0 - e.array().square())).matrix();
      g.dense_weight += da * t.embed.pooled.transpose();
      g.dense_bias += da;
      dpooled = model.backend.dense_weight.transpose() * da;
    } else {
      dpooled = de;
    }
    const double inv_m = 1.0 / static_cast<double>(t.embed.pooled_ids.size());
    for (int32_t id : t.embed.pooled_ids) g.table.row(id) += inv_m * dpooled.transpose();
  }

  if (model.config.enable_removal && up.logp_weight != 0.0) {
    std::vector<double> gl = log_p_logit_grad(t.probs, t.selection);
    for (auto& v : gl) v *= up.logp_weight;
    const Eigen::Index n = t.token_rows.rows();
    Eigen::Map<const Eigen::VectorXd> glv(gl.data(), n);
    g.conv_bias += glv.sum();
    // logit_i = b + w1.x_i + w0.x_{i-1} + w2.x_{i+1}
    g.conv_weight.row(1) += glv.transpose() * t.token_rows;
    if (n > 1) {
      g.conv_weight.row(0) += glv.tail(n - 1).transpose() * t.token_rows.topRows(n - 1);
      g.conv_weight.row(2) += glv.head(n - 1).transpose() * t.token_rows.bottomRows(n - 1);
    }
    if (embed_grads) {
      const Eigen::MatrixXd& w = model.agent.conv_weight;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd dx = glv(i) * w.row(1);
        if (i + 1 < n) dx += glv(i + 1) * w.row(0);
        if (i > 0) dx += glv(i - 1) * w.row(2);
        g.table.row(t.tokens.token_ids[static_cast<size_t>(i)]) += dx;
      }
    }
  }
}

namespace {

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<size_t>(v.size())}; }

}  // namespace

std::vector<ParamView> parameter_views(Model& m) {
  const bool emb = m.embedder_trainable();
  const bool rem = m.config.enable_removal;
  const bool cv = m.config.enable_cvib;
  CvibModel& c = m.cvib;
  return {
      {"encoder.table", span_of(m.backend.table), emb},
      {"encoder.dense_weight", span_of(m.backend.dense_weight), emb},
      {"encoder.dense_bias", span_of(m.backend.dense_bias), emb},
      {"removal.conv_weight", span_of(m.agent.conv_weight), rem},
      {"removal.conv_bias", std::span<double>(&m.agent.conv_bias, 1), rem},
      {"cvib.enc_mu_w", span_of(c.enc_mu_w), cv},
      {"cvib.enc_mu_b", span_of(c.enc_mu_b), cv},
      {"cvib.enc_ls_w", span_of(c.enc_ls_w), cv},
      {"cvib.enc_ls_b", span_of(c.enc_ls_b), cv},
      {"cvib.dec_w", span_of(c.dec_w), cv},
      {"cvib.dec_b", span_of(c.dec_b), cv},
      {"cvib.prior_mu_w", span_of(c.prior_mu_w), cv},
      {"cvib.prior_mu_b", span_of(c.prior_mu_b), cv},
      {"cvib.prior_ls_w", span_of(c.prior_ls_w), cv},
      {"cvib.prior_ls_b", span_of(c.prior_ls_b), cv},
  };
}

std::vector<ParamView> gradient_views(const Model& m, Gradients& g) {
  const bool emb = m.embedder_trainable();
  const bool rem = m.config.enable_removal;
  const bool cv = m.config.enable_cvib;
  return {
      {"encoder.table", span_of(g.table), emb},
      {"encoder.dense_weight", span_of(g.dense_weight), emb},
      {"encoder.dense_bias", span_of(g.dense_bias), emb},
      {"removal.conv_weight", span_of(g.conv_weight), rem},
      {"removal.conv_bias", std::span<double>(&g.conv_bias, 1), rem},
      {"cvib.enc_mu_w", span_of(g.enc_mu_w), cv},
      {"cvib.enc_mu_b", span_of(g.enc_mu_b), cv},
      {"cvib.enc_ls_w", span_of(g.enc_ls_w), cv},
      {"cvib.enc_ls_b", span_of(g.enc_ls_b), cv},
      {"cvib.dec_w", span_of(g.dec_w), cv},
      {"cvib.dec_b", span_of(g.dec_b), cv},
      {"cvib.prior_mu_w", span_of(g.prior_mu_w), cv},
      {"cvib.prior_mu_b", span_of(g.prior_mu_b), cv},
      {"cvib.prior_ls_w", span_of(g.prior_ls_w), cv},
      {"cvib.prior_ls_b", span_of(g.prior_ls_b), cv},
  };
}

}  // namespace clonesearch
