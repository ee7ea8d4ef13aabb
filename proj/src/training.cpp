#include "clonesearch/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "clonesearch/util.hpp"

namespace clonesearch {

using nlohmann::json;

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw domain_error("cosine_similarity: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw domain_error("cosine_similarity: zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

double cosine_loss(const Eigen::VectorXd& z_a, const Eigen::VectorXd& z_b, int label) {
  const double d = static_cast<double>(label) - cosine_similarity(z_a, z_b);
  return d * d;
}

Eigen::VectorXd cosine_grad(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) throw domain_error("cosine_grad: zero vector");
  const double c = u.dot(v) / (nu * nv);
  return v / (nu * nv) - c * u / (nu * nu);
}

json LossBreakdown::to_json() const {
  return {{"L_cos", l_cos},
          {"L_RL", l_rl},
          {"L_CVIB_total", l_cvib_total},
          {"L_CVIB_kl", l_cvib_kl},
          {"L_CVIB_recon", l_cvib_recon},
          {"total", total},
          {"reward", reward}};
}

LossBreakdown composite_loss(std::span<const PairTerms> pairs, const TrainConfig& cfg,
                             std::optional<double> fixed_reward) {
  LossBreakdown out;
  if (pairs.empty()) return out;
  const double n = static_cast<double>(pairs.size());
  for (const auto& p : pairs) out.l_cos += p.l_cos;
  out.l_cos /= n;
  if (cfg.enable_removal) {
    out.reward = fixed_reward ? *fixed_reward : reward(out.l_cos, cfg.eps_guard);
    for (const auto& p : pairs) out.l_rl += rl_loss(p.p_a, p.p_b, out.reward);
    out.l_rl /= n;
  }
  if (cfg.enable_cvib) {
    for (const auto& p : pairs) {
      out.l_cvib_kl += p.kl_part;
      out.l_cvib_recon += p.recon_part;
    }
    out.l_cvib_kl /= n;
    out.l_cvib_recon /= n;
    out.l_cvib_total = out.l_cvib_recon + cfg.beta2 * out.l_cvib_kl;
  }
  out.total = out.l_cos + cfg.beta1 * out.l_rl + out.l_cvib_total;
  return out;
}

BatchResult run_batch(const Model& model, std::span<const PairInput> batch, Gradients* grads,
                      std::optional<double> fixed_reward) {
  const TrainConfig& cfg = model.config;
  BatchResult result;
  std::vector<SideTrace> left, right;
  left.reserve(batch.size());
  right.reserve(batch.size());
  for (const auto& in : batch) {
    left.push_back(forward_side(model, in.left, in.left_cond, in.left_eps));
    right.push_back(forward_side(model, in.right, in.right_cond, in.right_eps));
    PairTerms t;
    t.l_cos = cosine_loss(left.back().z, right.back().z, in.label);
    if (cfg.enable_removal) {
      t.p_a = left.back().selection.p;
      t.p_b = right.back().selection.p;
    }
    if (cfg.enable_cvib) {
      t.kl_part = 0.5 * (left.back().kl + right.back().kl);
      t.recon_part = 0.5 * (left.back().recon_error + right.back().recon_error);
    }
    result.terms.push_back(t);
  }
  result.loss = composite_loss(result.terms, cfg, fixed_reward);
  if (grads == nullptr) return result;

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const SideTrace& a = left[i];
    const SideTrace& b = right[i];
    const double c = cosine_similarity(a.z, b.z);
    const double dcos = -2.0 * (static_cast<double>(batch[i].label) - c) * inv_b;
    SideUpstream ua{dcos * cosine_grad(a.z, b.z), 0.0, 0.0, 0.0};
    SideUpstream ub{dcos * cosine_grad(b.z, a.z), 0.0, 0.0, 0.0};
    if (cfg.enable_cvib) {
      ua.recon_weight = ub.recon_weight = 0.5 * inv_b;
      ua.kl_weight = ub.kl_weight = 0.5 * cfg.beta2 * inv_b;
    }
    if (cfg.enable_removal) {
      // L_RL = -R log p_a log p_b with R held constant
      const double r = result.loss.reward;
      ua.logp_weight = cfg.beta1 * inv_b * (-r * std::log(result.terms[i].p_b));
      ub.logp_weight = cfg.beta1 * inv_b * (-r * std::log(result.terms[i].p_a));
    }
    backward_side(model, a, ua, *grads);
    backward_side(model, b, ub, *grads);
  }
  return result;
}

void Optimizer::step(Model& model, Gradients& grads) {
  auto params = parameter_views(model);
  auto gviews = gradient_views(model, grads);
  if (cfg_.optimizer == "adam" && m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.trainable ? p.values.size() : 0, 0.0);
      v_.emplace_back(p.trainable ? p.values.size() : 0, 0.0);
    }
  }
  ++t_;
  const double lr = cfg_.learning_rate;
  for (size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    std::span<double> w = params[k].values;
    std::span<double> g = gviews[k].values;
    if (cfg_.optimizer == "sgd") {
      for (size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    } else {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      auto& m = m_[k];
      auto& v = v_[k];
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
  }
}

json telemetry_json(const EpochTelemetry& t, const TrainConfig& cfg) {
  json j = t.mean.to_json();
  j["epoch"] = t.epoch;
  j["steps"] = t.steps;
  j["mean_p"] = t.mean_p;
  // L_RL = -R log p_a log p_b is never positive; the sign is reported as-is
  j["L_RL_sign"] = t.mean.l_rl < 0 ? "negative" : (t.mean.l_rl > 0 ? "positive" : "zero");
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["eps_guard"] = cfg.eps_guard;
  j["learning_rate"] = cfg.learning_rate;
  j["optimizer"] = cfg.optimizer;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  return j;
}

PairInput make_pair_input(const Model& model, const PairSample& pair, const CorpusStore& corpus) {
  const FunctionRecord& l = corpus.get(pair.left_id);
  const FunctionRecord& r = corpus.get(pair.right_id);
  PairInput in;
  in.left = model.backend.tokenize(l.instruction_sequence);
  in.right = model.backend.tokenize(r.instruction_sequence);
  in.left_cond = model.conditions_for(l.meta());
  in.right_cond = model.conditions_for(r.meta());
  in.label = pair.label;
  return in;
}

TrainResult train(const TrainConfig& cfg, const SplitManifest& split, const CorpusStore& corpus,
                  const std::function<void(const EpochTelemetry&)>& on_epoch) {
  if (split.pairs.empty()) throw domain_error("train: split " + split.name + " has no pairs");
  TrainResult result{Model::init(cfg, corpus.vocab().arch, corpus.vocab().opt), {}};
  Model& model = result.model;
  const TrainConfig& rc = model.config;

  std::unordered_map<std::string, TokenizedSequence> token_cache;
  std::vector<PairInput> inputs;
  inputs.reserve(split.pairs.size());
  for (const auto& p : split.pairs) {
    PairInput in;
    for (const auto* id : {&p.left_id, &p.right_id}) {
      if (!token_cache.count(*id)) token_cache.emplace(*id, model.backend.tokenize(corpus.get(*id).instruction_sequence));
    }
    in.left = token_cache.at(p.left_id);
    in.right = token_cache.at(p.right_id);
    in.left_cond = model.conditions_for(corpus.get(p.left_id).meta());
    in.right_cond = model.conditions_for(corpus.get(p.right_id).meta());
    in.label = p.label;
    inputs.push_back(std::move(in));
  }

  Rng shuffle_rng(derive_seed(rc.seed, "train/shuffle"));
  Rng noise_rng(derive_seed(rc.seed, "train/noise"));
  Optimizer optimizer(rc);
  Gradients grads = Gradients::zeros_like(model);
  const auto latent = static_cast<Eigen::Index>(model.latent_dim());

  std::vector<size_t> order(inputs.size());
  for (size_t epoch = 1; epoch <= rc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);
    EpochTelemetry tel;
    tel.epoch = epoch;
    double weight = 0.0;
    for (size_t start = 0, batch_no = 0; start < order.size(); start += rc.batch_size, ++batch_no) {
      const size_t end = std::min(order.size(), start + rc.batch_size);
      std::vector<PairInput> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        PairInput in = inputs[order[i]];
        if (rc.enable_cvib) {
          in.left_eps.resize(latent);
          in.right_eps.resize(latent);
          for (Eigen::Index d = 0; d < latent; ++d) in.left_eps(d) = noise_rng.normal();
          for (Eigen::Index d = 0; d < latent; ++d) in.right_eps(d) = noise_rng.normal();
        }
        batch.push_back(std::move(in));
      }
      grads.set_zero();
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no);
      BatchResult br;
      try {
        br = run_batch(model, batch, &grads);
      } catch (const Error& e) {
        // inputs were checked when the pairs were built, so a degenerate
        // forward pass here means the parameters have diverged
        if (e.kind() != "domain") throw;
        throw Error("numeric", "forward pass failed at " + where + ": " + e.what());
      }
      if (!std::isfinite(br.loss.total)) throw Error("numeric", "non-finite loss at " + where);
      optimizer.step(model, grads);
      ++model.step;
      ++tel.steps;
      const double w = static_cast<double>(batch.size());
      weight += w;
      tel.mean.l_cos += w * br.loss.l_cos;
      tel.mean.l_rl += w * br.loss.l_rl;
      tel.mean.l_cvib_total += w * br.loss.l_cvib_total;
      tel.mean.l_cvib_kl += w * br.loss.l_cvib_kl;
      tel.mean.l_cvib_recon += w * br.loss.l_cvib_recon;
      tel.mean.total += w * br.loss.total;
      tel.mean.reward += w * br.loss.reward;
      for (const auto& t : br.terms) tel.mean_p += 0.5 * (t.p_a + t.p_b);
    }
    tel.mean.l_cos /= weight;
    tel.mean.l_rl /= weight;
    tel.mean.l_cvib_total /= weight;
    tel.mean.l_cvib_kl /= weight;
    tel.mean.l_cvib_recon /= weight;
    tel.mean.total /= weight;
    tel.mean.reward /= weight;
    tel.mean_p /= weight;
    result.telemetry.push_back(tel);
    if (on_epoch) on_epoch(tel);
  }
  return result;
}

GradCheckReport grad_check(Model model, std::span<const PairInput> batch, double step, double tolerance) {
  const double fixed_r = run_batch(model, batch, nullptr).loss.reward;
  Gradients grads = Gradients::zeros_like(model);
  run_batch(model, batch, &grads, fixed_r);

  GradCheckReport report;
  auto params = parameter_views(model);
  auto gviews = gradient_views(model, grads);
  for (size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    double worst = 0.0;
    for (size_t i = 0; i < params[k].values.size(); ++i) {
      double& w = params[k].values[i];
      const double saved = w;
      w = saved + step;
      const double up = run_batch(model, batch, nullptr, fixed_r).loss.total;
      w = saved - step;
      const double down = run_batch(model, batch, nullptr, fixed_r).loss.total;
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = gviews[k].values[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
      ++report.checked;
    }
    report.per_parameter.emplace_back(params[k].name, worst);
    if (worst >= report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst_parameter = params[k].name;
    }
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

TinyInstance make_tiny_instance(TrainConfig cfg, uint64_t seed, size_t n_pairs) {
  cfg.backend = "compact";
  cfg.dim = std::min<size_t>(cfg.dim, 8);
  cfg.max_length = 12;
  cfg.k = 6;
  cfg.latent_dim = 3;
  cfg.vocab_size = 24;
  cfg.seed = seed;
  const std::vector<std::string> archs{"A0", "A1", "A2"};
  const std::vector<std::string> opts{"O0", "O1"};
  TinyInstance inst{Model::init(cfg, archs, opts), {}};
  Rng rng(derive_seed(seed, "tiny-instance"));

  // move every parameter off its initialization so no gradient is trivially zero
  for (auto& view : parameter_views(inst.model)) {
    for (double& v : view.values) v += 0.3 * rng.normal();
  }
  const std::vector<std::string> words{"mov", "add", "r0", "r1", "r2", "0x10", "jmp", "cmp", "sub", "[", "]", "+"};
  const auto latent = static_cast<Eigen::Index>(inst.model.latent_dim());
  for (size_t p = 0; p < n_pairs; ++p) {
    PairInput in;
    for (int side = 0; side < 2; ++side) {
      std::string text;
      size_t n_words = 7 + rng.below(8);  // some sequences exceed max_length
      for (size_t w = 0; w < n_words; ++w) text += words[rng.below(words.size())] + " ";
      TokenizedSequence t = inst.model.backend.tokenize(text);
      ConditionLabels c = ConditionLabels::one_hot(archs.size(), opts.size(), rng.below(archs.size()),
                                                   rng.below(opts.size()));
      Eigen::VectorXd eps(latent);
      for (Eigen::Index d = 0; d < latent; ++d) eps(d) = rng.normal();
      if (!cfg.enable_cvib) eps.resize(0);
      (side == 0 ? in.left : in.right) = std::move(t);
      (side == 0 ? in.left_cond : in.right_cond) = std::move(c);
      (side == 0 ? in.left_eps : in.right_eps) = std::move(eps);
    }
    in.label = static_cast<int>(p % 2);
    inst.batch.push_back(std::move(in));
  }
  return inst;
}

}  // namespace clonesearch
