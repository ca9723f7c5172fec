#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vaoi/agents.hpp"
#include "vaoi/diffusion.hpp"

using namespace vaoi;

namespace {

ActorArch tiny_arch() {
  ActorArch a;
  a.time_embedding_dim = 4;
  a.time_hidden = 4;
  a.time_out = 4;
  a.hidden = {4, 4};
  return a;
}

DiffusionActor make_actor(int state_dim, int n_actions, int k, const ActorArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  return DiffusionActor(state_dim, n_actions, DiffusionSchedule::build(k, 0.1, 10.0), arch, rng);
}

/// An actor whose noise predictor is identically zero.
DiffusionActor zero_noise_actor(int state_dim, int n_actions, int k) {
  DiffusionActor a = make_actor(state_dim, n_actions, k, tiny_arch(), 3);
  for (auto& p : a.params()) p.value->setZero();
  return a;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) { return standard_normal(r, c, rng); }

}  // namespace

TEST(Schedule, EndpointValues) {
  const DiffusionSchedule s = DiffusionSchedule::build(5, 0.1, 10.0);
  EXPECT_NEAR(s.beta[1], 1.0 - std::exp(-0.218), 1e-12);
  EXPECT_NEAR(s.beta[1], 0.1959, 1e-4);
  EXPECT_NEAR(s.beta[5], 1.0 - std::exp(-1.802), 1e-12);
  EXPECT_NEAR(s.beta[5], 0.8350, 1e-4);
}

TEST(Schedule, ConstantWhenEndpointsMatch) {
  const DiffusionSchedule s = DiffusionSchedule::build(4, 2.0, 2.0);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(s.beta[static_cast<std::size_t>(k)], 1.0 - std::exp(-0.5), 1e-15);
}

TEST(Schedule, Invariants) {
  for (int k_total : {1, 2, 5, 10, 50}) {
    const DiffusionSchedule s = DiffusionSchedule::build(k_total, 0.1, 10.0);
    EXPECT_EQ(s.beta_tilde[1], 0.0);
    EXPECT_EQ(s.alpha_bar[0], 1.0);
    for (int k = 1; k <= k_total; ++k) {
      const auto i = static_cast<std::size_t>(k);
      EXPECT_GT(s.beta[i], 0.0);
      EXPECT_LT(s.beta[i], 1.0);
      EXPECT_NEAR(s.alpha[i], 1.0 - s.beta[i], 1e-15);
      EXPECT_LT(s.alpha_bar[i], s.alpha_bar[i - 1]);
      EXPECT_GE(s.beta_tilde[i], 0.0);
      EXPECT_LE(s.beta_tilde[i], s.beta[i]);
    }
  }
}

TEST(Schedule, RejectsBadEndpoints) {
  EXPECT_THROW(DiffusionSchedule::build(0, 0.1, 10.0), ConfigError);
  EXPECT_THROW(DiffusionSchedule::build(5, 0.0, 10.0), ConfigError);
  EXPECT_THROW(DiffusionSchedule::build(5, -1.0, 10.0), ConfigError);
  EXPECT_THROW(DiffusionSchedule::build(5, 2.0, 1.0), ConfigError);
}

TEST(Reconstruct, ZeroNoiseIdentity) {
  const DiffusionActor a = zero_noise_actor(3, 4, 5);
  Rng rng(1);
  const Mat x = random_mat(4, 2, rng);
  const Mat s = Mat::Random(3, 2);
  for (int k = 1; k <= 5; ++k) {
    const Mat x0 = reconstruct_x0(a, x, k, s);
    EXPECT_LT((x0 - x / std::sqrt(a.schedule().alpha_bar[static_cast<std::size_t>(k)])).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Reconstruct, UnitAlphaBarIsIdentity) {
  DiffusionSchedule s = DiffusionSchedule::build(2, 0.1, 10.0);
  s.alpha_bar[1] = 1.0;
  Rng rng(2);
  const Mat x = random_mat(3, 1, rng);
  const Mat e = random_mat(3, 1, rng).array().tanh().matrix();
  EXPECT_LT((x0_from_noise(s, x, e, 1) - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reconstruct, MatchesStraightLineFormula) {
  const DiffusionActor a = make_actor(3, 4, 5, tiny_arch(), 7);
  Rng rng(3);
  for (int k = 1; k <= 5; ++k) {
    const Mat x = random_mat(4, 1, rng);
    const Mat s = Mat::Random(3, 1);
    const Mat raw = a.noise_raw(x, k, s);
    const double ab = a.schedule().alpha_bar[static_cast<std::size_t>(k)];
    const Mat x0 = reconstruct_x0(a, x, k, s);
    for (int i = 0; i < 4; ++i) {
      const double expected = x(i) / std::sqrt(ab) - std::sqrt(1.0 / ab - 1.0) * std::tanh(raw(i));
      EXPECT_NEAR(x0(i), expected, 1e-6);
    }
  }
}

TEST(Reconstruct, StepOutOfRangeThrows) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 1);
  const Mat x = Mat::Zero(3, 1);
  const Mat s = Mat::Zero(2, 1);
  EXPECT_THROW(reconstruct_x0(a, x, 0, s), ArgumentError);
  EXPECT_THROW(reconstruct_x0(a, x, 6, s), ArgumentError);
  EXPECT_THROW(posterior_mean(a, x, 6, s), ArgumentError);
}

TEST(PosteriorMean, ZeroNoiseIdentity) {
  const DiffusionActor a = zero_noise_actor(3, 4, 5);
  Rng rng(4);
  const Mat x = random_mat(4, 3, rng);
  const Mat s = Mat::Random(3, 3);
  for (int k = 1; k <= 5; ++k) {
    const Mat mu = posterior_mean(a, x, k, s);
    EXPECT_LT((mu - x / std::sqrt(a.schedule().alpha[static_cast<std::size_t>(k)])).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(PosteriorMean, NoiseFormMatchesX0Form) {
  const DiffusionActor a = make_actor(4, 6, 5, tiny_arch(), 11);
  Rng rng(5);
  for (int k = 1; k <= 5; ++k) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Mat x = 3.0 * random_mat(6, 1, rng);
      const Mat s = Mat::Random(4, 1);
      const Mat eps = a.predict_noise(x, k, s);
      const Mat from_noise = mean_from_noise(a.schedule(), x, eps, k);
      const Mat from_x0 = mean_from_x0(a.schedule(), x, x0_from_noise(a.schedule(), x, eps, k), k);
      worst = std::max(worst, (from_noise - from_x0).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-6) << "k=" << k;
  }
}

TEST(PosteriorMean, FirstStepEqualsReconstruction) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 2);
  Rng rng(6);
  const Mat x = random_mat(3, 1, rng);
  const Mat s = Mat::Random(2, 1);
  EXPECT_LT((posterior_mean(a, x, 1, s) - reconstruct_x0(a, x, 1, s)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DenoiseStep, ZeroNoiseGivesMean) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 2);
  Rng rng(7);
  const Mat x = random_mat(3, 2, rng);
  const Mat s = Mat::Random(2, 2);
  for (int k = 1; k <= 5; ++k)
    EXPECT_EQ(denoise_step(a, x, k, s, Mat::Zero(3, 2)), posterior_mean(a, x, k, s));
}

TEST(DenoiseStep, FinalStepIgnoresNoise) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 2);
  Rng rng(8);
  const Mat x = random_mat(3, 1, rng);
  const Mat s = Mat::Random(2, 1);
  EXPECT_EQ(denoise_step(a, x, 1, s, random_mat(3, 1, rng)), posterior_mean(a, x, 1, s));
}

TEST(DenoiseStep, DeterministicGivenNoise) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 2);
  Rng rng(9);
  const Mat x = random_mat(3, 1, rng);
  const Mat s = Mat::Random(2, 1);
  const Mat z = random_mat(3, 1, rng);
  EXPECT_EQ(denoise_step(a, x, 3, s, z), denoise_step(a, x, 3, s, z));
}

TEST(DenoiseStep, NoiseDimensionMismatchThrows) {
  const DiffusionActor a = make_actor(2, 3, 5, tiny_arch(), 2);
  EXPECT_THROW(denoise_step(a, Mat::Zero(3, 1), 2, Mat::Zero(2, 1), Mat::Zero(4, 1)), ArgumentError);
}

TEST(ActorChain, ForwardAgreesWithExplicitDenoising) {
  const DiffusionActor a = make_actor(3, 4, 5, tiny_arch(), 12);
  Rng rng(10);
  const Mat s = Mat::Random(3, 2);
  const ChainNoise noise = draw_chain_noise(5, 4, 2, rng);
  Mat x = noise.x_start;
  for (int k = 5; k >= 1; --k) x = denoise_step(a, x, k, s, noise.z[static_cast<std::size_t>(k)]);
  const auto pass = a.forward(s, noise);
  EXPECT_LT((pass.logits - x).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((pass.probs - softmax_columns(x)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ActorChain, ConstantFinalSampleGivesUniformPolicy) {
  const DiffusionActor a = zero_noise_actor(2, 5, 5);
  ChainNoise noise;
  noise.x_start = Mat::Constant(5, 1, 0.7);
  noise.z.assign(6, Mat::Constant(5, 1, -0.3));
  const auto pass = a.forward(Mat::Zero(2, 1), noise);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(pass.probs(i, 0), 0.2, 1e-12);
}

TEST(ActorChain, UniformOverTwentyOneActionsHasLogEntropy) {
  const DiffusionActor a = zero_noise_actor(20, 21, 5);
  ChainNoise noise;
  noise.x_start = Mat::Constant(21, 1, 1.0);
  noise.z.assign(6, Mat::Constant(21, 1, 0.5));
  const auto pass = a.forward(Mat::Zero(20, 1), noise);
  EXPECT_NEAR(policy_entropy(Vec(pass.probs.col(0))), std::log(21.0), 1e-12);
  EXPECT_NEAR(std::log(21.0), 3.0445, 1e-4);
}

TEST(ActorChain, SameSeedSameDistribution) {
  const DiffusionActor a = make_actor(3, 4, 5, tiny_arch(), 5);
  const Vec s = Vec::Random(3);
  Rng r1(99), r2(99);
  EXPECT_EQ(sample_action_distribution(a, s, r1).probs, sample_action_distribution(a, s, r2).probs);
}

TEST(ActorChain, ProbabilitiesArePositiveAndNormalised) {
  ActorArch arch = tiny_arch();
  arch.hidden = {16, 16};
  Rng rng(21);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DiffusionActor a = make_actor(5, 6, 5, arch, seed);
    const Mat s = Mat::Random(5, 8);
    const Mat p = a.forward(s, rng).probs;
    EXPECT_GT(p.minCoeff(), 0.0);
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      EXPECT_NEAR(p.col(c).sum(), 1.0, 1e-9);
      const double h = policy_entropy(Vec(p.col(c)));
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::log(6.0) + 1e-12);
    }
  }
}

TEST(ActorChain, FullWidthArchitectureShapes) {
  Rng rng(1);
  DiffusionActor a(20, 21, DiffusionSchedule::build(5, 0.1, 10.0), ActorArch{}, rng);
  const ParamRefs p = a.params();
  ASSERT_EQ(p.size(), 10u);
  EXPECT_EQ(p[0].value->rows(), 32);  // time hidden
  EXPECT_EQ(p[0].value->cols(), 16);  // sinusoidal embedding
  EXPECT_EQ(p[2].value->rows(), 16);  // time output
  EXPECT_EQ(p[4].value->cols(), 21 + 20 + 16);
  EXPECT_EQ(p[4].value->rows(), 256);
  EXPECT_EQ(p[6].value->rows(), 256);
  EXPECT_EQ(p[8].value->rows(), 21);
  const Mat eps = a.predict_noise(Mat::Random(21, 3), 2, Mat::Random(20, 3));
  EXPECT_LT(eps.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Entropy, ReferenceValues) {
  EXPECT_NEAR(policy_entropy(Vec::Constant(4, 0.25)), std::log(4.0), 1e-15);
  EXPECT_NEAR(policy_entropy(Vec::Constant(2, 0.5)), std::log(2.0), 1e-15);
  Vec onehot = Vec::Zero(5);
  onehot(2) = 1.0;
  EXPECT_NEAR(policy_entropy(onehot), 0.0, 1e-12);
  Vec near = Vec::Constant(5, 1e-12);
  near(0) = 1.0 - 4e-12;
  EXPECT_NEAR(policy_entropy(near), 0.0, 1e-9);
}

TEST(Mish, GradientMatchesFiniteDifferences) {
  for (double x = -25.0; x <= 25.0; x += 0.37) {
    const double h = 1e-6;
    const double numeric = (mish(x + h) - mish(x - h)) / (2.0 * h);
    EXPECT_NEAR(mish_grad(x), numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << x;
  }
  EXPECT_NEAR(mish(1.0), std::tanh(std::log1p(std::exp(1.0))), 1e-15);
  EXPECT_NEAR(mish(-3.0), -3.0 * std::tanh(std::log1p(std::exp(-3.0))), 1e-15);
  const Mat z = Vec::LinSpaced(101, -30.0, 30.0);
  const Mat y = activate(z, Activation::kMish);
  const Mat g = activation_grad(z, y, Activation::kMish);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(y(i), mish(z(i)), 1e-14 * std::max(1.0, std::abs(z(i))));
    EXPECT_NEAR(g(i), mish_grad(z(i)), 1e-14);
  }
}

// d/dtheta of -(pi^T q + psi H) through all five denoising steps.
TEST(ActorGradient, DiffusionChainMatchesFiniteDifferences) {
  DiffusionActor actor = make_actor(3, 4, 5, tiny_arch(), 17);
  Rng rng(18);
  const Mat states = Mat::Random(3, 3);
  const ChainNoise noise = draw_chain_noise(5, 4, 3, rng);
  const Mat q = 2.0 * Mat::Random(4, 3);
  const double psi = 0.05;
  DiffusionActor grads = actor.zeros_like();
  actor_loss_from_pass(actor, actor.forward(states, noise), q, psi, &grads);
  const auto result = vaoi::testing::check_gradients(actor.params(), grads.params(), [&] {
    return actor_loss_from_pass(actor, actor.forward(states, noise), q, psi);
  });
  EXPECT_GT(result.checked, 100);
  EXPECT_LT(result.max_rel_error, 1e-4);
}

TEST(ActorGradient, MlpActorMatchesFiniteDifferences) {
  Rng init(4);
  MlpActor actor(3, 4, {4, 4}, init);
  Rng rng(1);
  const Mat states = Mat::Random(3, 5);
  const Mat q = Mat::Random(4, 5);
  MlpActor grads = actor.zeros_like();
  actor_loss_from_pass(actor, actor.forward(states, rng), q, 0.3, &grads);
  const auto result = vaoi::testing::check_gradients(actor.params(), grads.params(), [&] {
    return actor_loss_from_pass(actor, actor.forward(states, rng), q, 0.3);
  });
  EXPECT_LT(result.max_rel_error, 1e-4);
}

TEST(Embedding, SinCosHalves) {
  const Vec e = sinusoidal_embedding(3.0, 8);
  EXPECT_NEAR(e(0), std::sin(3.0), 1e-15);
  EXPECT_NEAR(e(4), std::cos(3.0), 1e-15);
  EXPECT_NEAR(e(3), std::sin(3.0 * std::exp(-std::log(10000.0))), 1e-15);
  EXPECT_THROW(sinusoidal_embedding(1.0, 3), ArgumentError);
}
