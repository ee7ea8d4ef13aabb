#include <gtest/gtest.h>

#include <cmath>

#include "clonesearch/cvib.hpp"
#include "clonesearch/model.hpp"
#include "clonesearch/training.hpp"
#include "hand_instance.hpp"
#include "test_support.hpp"

using namespace clonesearch;

using clonesearch::testing::hand_model;
using clonesearch::testing::vec;

TEST(ConditionLabels, OneHotAndAbsent) {
  auto c = ConditionLabels::one_hot(5, 4, 2, std::nullopt);
  EXPECT_EQ(c.arch, vec({0, 0, 1, 0, 0}));
  EXPECT_EQ(c.opt, Eigen::VectorXd::Zero(4));
  auto a = ConditionLabels::absent(5, 4);
  EXPECT_EQ(a.concat(), Eigen::VectorXd::Zero(9));
  EXPECT_THROW(ConditionLabels::one_hot(5, 4, 5, 0), Error);
}

TEST(Encode, HandLinearAlgebra) {
  // d_z = 2 encoder on the unit vector e_1, no condition slots
  CvibModel m;
  m.input_dim = 3;
  m.latent_dim = 2;
  m.enc_mu_w.resize(2, 3);
  m.enc_mu_w << 1.5, 2.0, 3.0, -0.5, 4.0, 5.0;
  m.enc_mu_b = vec({0.25, 0.0});
  m.enc_ls_w.resize(2, 3);
  m.enc_ls_w << 0.1, 0.0, 0.0, -0.2, 0.0, 0.0;
  m.enc_ls_b = vec({0.0, 1.0});
  auto g = encode(vec({1, 0, 0}), ConditionLabels::absent(0, 0), m);
  EXPECT_EQ(g.mu, vec({1.75, -0.5}));
  EXPECT_EQ(g.log_sigma, vec({0.1, 0.8}));
}

TEST(Encode, DeterministicAndAbsentEqualsZero) {
  auto m = CvibModel::init(6, 3, 2, 4, 9);
  Eigen::VectorXd e = vec({0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
  auto a = encode(e, ConditionLabels::one_hot(3, 2, 1, 0), m);
  auto b = encode(e, ConditionLabels::one_hot(3, 2, 1, 0), m);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.log_sigma, b.log_sigma);
  ConditionLabels zero{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(2)};
  EXPECT_EQ(encode(e, zero, m).mu, encode(e, ConditionLabels::absent(3, 2), m).mu);
  EXPECT_THROW(encode(vec({1, 2}), zero, m), Error);
}

TEST(Reparameterize, IdentityAndUnitCases) {
  GaussianParams g{vec({0.5, -1.0}), vec({0.3, -0.7})};
  EXPECT_EQ(reparameterize(g, vec({0, 0})).z, g.mu);
  GaussianParams unit{vec({0, 0, 0}), vec({0, 0, 0})};
  EXPECT_EQ(reparameterize(unit, vec({1, 0, 0})).z, vec({1, 0, 0}));
}

TEST(Reparameterize, ExactFormulaAndAffineInEps) {
  GaussianParams g{vec({0.5, -1.0}), vec({0.3, -0.7})};
  Eigen::VectorXd eps = vec({0.9, -1.3});
  auto enc = reparameterize(g, eps);
  EXPECT_EQ(enc.eps, eps);
  for (Eigen::Index i = 0; i < 2; ++i) EXPECT_EQ(enc.z(i), g.mu(i) + std::exp(g.log_sigma(i)) * eps(i));
  const double alpha = 2.5;
  Eigen::VectorXd lhs = reparameterize(g, alpha * eps).z - g.mu;
  Eigen::VectorXd rhs = alpha * (enc.z - g.mu);
  EXPECT_LT((lhs - rhs).norm(), 1e-14);
}

TEST(Reparameterize, MonteCarloMean) {
  GaussianParams g{vec({0.5, -1.0}), vec({0.3, -0.7})};
  clonesearch::Rng rng(123);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) sum += reparameterize(g, vec({rng.normal(), rng.normal()})).z;
  Eigen::VectorXd mean = sum / n;
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_LT(std::abs(mean(i) - g.mu(i)), 3.0 * std::exp(g.log_sigma(i)) / std::sqrt(double(n)));
  }
}

TEST(Decode, DegenerateAndHandCases) {
  auto m = hand_model();
  Eigen::VectorXd z = vec({2.0, -1.0});
  EXPECT_EQ(decode(z, m), decode(z, m));
  EXPECT_EQ(decode(z, m), vec({1.5 + 0.1, -2.0, 0.5 + 0.75 - 0.1}));
  m.dec_w.setZero();
  EXPECT_EQ(decode(z, m), m.dec_b);
}

TEST(Prior, StandardNormalAtInit) {
  auto m = CvibModel::init(6, 3, 2, 4, 1);
  for (const auto& c : {ConditionLabels::absent(3, 2), ConditionLabels::one_hot(3, 2, 2, 1)}) {
    auto p = prior(c, m);
    EXPECT_EQ(p.mu, Eigen::VectorXd::Zero(4));
    EXPECT_EQ(p.log_sigma, Eigen::VectorXd::Zero(4));
  }
}

TEST(Prior, HandSeededMapDistinguishesArchitectures) {
  CvibModel m;
  m.n_arch = 4;
  m.n_opt = 1;
  m.latent_dim = 2;
  m.prior_mu_w.resize(2, 5);
  m.prior_mu_w << 0, 0, 1, 2, 0, 0, 0, -1, 3, 0;
  m.prior_mu_b = vec({0.5, 0.5});
  m.prior_ls_w = Eigen::MatrixXd::Zero(2, 5);
  m.prior_ls_w(0, 3) = 0.25;
  m.prior_ls_b = vec({0, 0});
  auto p2 = prior(ConditionLabels::one_hot(4, 1, 2, std::nullopt), m);
  auto p3 = prior(ConditionLabels::one_hot(4, 1, 3, std::nullopt), m);
  EXPECT_EQ(p2.mu, vec({1.5, -0.5}));
  EXPECT_EQ(p3.mu, vec({2.5, 3.5}));
  EXPECT_EQ(p3.log_sigma, vec({0.25, 0}));
  auto absent1 = prior(ConditionLabels::absent(4, 1), m);
  auto absent2 = prior(ConditionLabels::absent(4, 1), m);
  EXPECT_EQ(absent1.mu, m.prior_mu_b);
  EXPECT_EQ(absent1.mu, absent2.mu);
}

TEST(KlGaussian, ClosedFormCases) {
  GaussianParams p{vec({0.3, -0.2}), vec({0.1, 0.4})};
  EXPECT_EQ(kl_gaussian(p, p), 0.0);
  GaussianParams q{vec({0.7}), vec({0.0})};
  GaussianParams std_normal{vec({0.0}), vec({0.0})};
  // 0.245 by numerical integration in the oracle script
  EXPECT_NEAR(kl_gaussian(q, std_normal), 0.245, 1e-15);
  GaussianParams wide{vec({0.0}), vec({std::log(2.0)})};
  EXPECT_NEAR(kl_gaussian(wide, std_normal), 0.80685281944005469058, 1e-14);
}

TEST(KlGaussian, NonNegativeOnGeneratedPairs) {
  clonesearch::Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    GaussianParams a{vec({rng.normal(), rng.normal(), rng.normal()}), vec({rng.normal(), rng.normal(), rng.normal()})};
    GaussianParams b{vec({rng.normal(), rng.normal(), rng.normal()}), vec({rng.normal(), rng.normal(), rng.normal()})};
    EXPECT_GT(kl_gaussian(a, b), 0.0);
    EXPECT_NEAR(kl_gaussian(a, a), 0.0, 1e-9);
  }
}

TEST(CvibLoss, VanishesAtPerfectReconstruction) {
  auto m = CvibModel::init(3, 1, 1, 2, 0);
  Eigen::VectorXd e = vec({0.1, 0.2, 0.3});
  GaussianParams g{vec({0.4, -0.4}), vec({0.1, 0.2})};
  auto enc = reparameterize(g, vec({0, 0}));
  auto l = cvib_loss(e, e, enc, enc, e, e, g, g, 0.7);
  EXPECT_EQ(l.total, 0.0);
  EXPECT_EQ(l.kl_part, 0.0);
  EXPECT_EQ(l.recon_part, 0.0);
}

TEST(CvibLoss, BetaZeroKeepsOnlyRecon) {
  Eigen::VectorXd e = vec({0.1, 0.2, 0.3});
  GaussianParams g{vec({0.4, -0.4}), vec({0.1, 0.2})};
  GaussianParams p{vec({0.0, 0.0}), vec({0.0, 0.0})};
  auto enc = reparameterize(g, vec({0, 0}));
  auto l = cvib_loss(e, e, enc, enc, vec({0, 0, 0}), e, p, p, 0.0);
  EXPECT_EQ(l.total, l.recon_part);
  EXPECT_GT(l.kl_part, 0.0);
}

TEST(CvibLoss, HandSizedOracle) {
  auto m = hand_model();
  Eigen::VectorXd e_a = vec({0.5, -1.0, 2.0}), e_b = vec({1.0, 0.0, -0.5});
  auto c_a = ConditionLabels::one_hot(1, 1, 0, std::nullopt);
  auto c_b = ConditionLabels::one_hot(1, 1, std::nullopt, 0);
  auto enc_a = reparameterize(encode(e_a, c_a, m), vec({0.3, -1.2}));
  auto enc_b = reparameterize(encode(e_b, c_b, m), vec({-0.4, 0.8}));
  auto l = cvib_loss(e_a, e_b, enc_a, enc_b, decode(enc_a.z, m), decode(enc_b.z, m), prior(c_a, m), prior(c_b, m),
                     0.01);
  EXPECT_NEAR(enc_a.z(0), 1.5912884454865319768, 1e-14);
  EXPECT_NEAR(enc_a.z(1), -1.4623977799156603953, 1e-14);
  EXPECT_NEAR(l.recon_part, 2.5458862507447992451, 1e-13);
  EXPECT_NEAR(l.kl_part, 0.70942455491675661849, 1e-13);
  EXPECT_NEAR(l.total, 2.5529804962939668113, 1e-13);
}

TEST(CvibGradCheck, EncoderDecoderPriorOnD6) {
  TrainConfig cfg;
  cfg.enable_removal = false;
  cfg.dim = 6;
  cfg.beta2 = 0.5;
  for (uint64_t seed : {1, 2}) {
    auto inst = make_tiny_instance(cfg, seed);
    ASSERT_EQ(inst.model.backend.info().dim, 6u);
    ASSERT_EQ(inst.model.latent_dim(), 3u);
    auto r = grad_check(inst.model, inst.batch);
    EXPECT_TRUE(r.pass) << r.worst_parameter << " " << r.max_rel_error;
    bool saw_prior = false;
    for (const auto& [name, err] : r.per_parameter) saw_prior |= name == "cvib.prior_mu_w";
    EXPECT_TRUE(saw_prior);
  }
}

TEST(Inference, IgnoresRecordMetadata) {
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.latent_dim = 4;
  cfg.max_length = 32;
  cfg.k = 16;
  auto model = Model::init(cfg, {"ARM", "x86"}, {"O0", "O2"});
  auto rec = clonesearch::testing::make_record("f", "ARM", "O0", "libx", 4);
  auto stripped = rec;
  stripped.architecture = "MIPS";
  stripped.optimization = "O9";
  stripped.library = "";
  stripped.name_raw = stripped.name_norm = "other";
  EXPECT_EQ(infer_encoding(model, rec), infer_encoding(model, stripped));
  EXPECT_EQ(infer_encoding(model, rec), infer_encoding(model, rec.instruction_sequence));
}
