#pragma once

// Soft actor-critic training for the four scheduler variants. One trainer
// template covers all of them:
//
//   sac       MlpActor       + ScalarCritic
//   d2sac     DiffusionActor + ScalarCritic
//   rs_dsac   MlpActor       + QuantileCritic (CVaR risk Q)
//   rs_d3sac  DiffusionActor + QuantileCritic (CVaR risk Q)
//
// Every variant shares the environment, replay buffer, Lagrange controller and
// update schedule: collect T transitions with the current multiplier, update
// the multiplier once, then critic update, actor update and soft target update.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "vaoi/critics.hpp"
#include "vaoi/diffusion.hpp"
#include "vaoi/env.hpp"
#include "vaoi/error.hpp"
#include "vaoi/lagrange.hpp"
#include "vaoi/nn.hpp"
#include "vaoi/replay.hpp"

namespace vaoi {

enum class Algo { kSac, kD2sac, kRsDsac, kRsD3sac };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::kSac: return "sac";
    case Algo::kD2sac: return "d2sac";
    case Algo::kRsDsac: return "rs_dsac";
    case Algo::kRsD3sac: return "rs_d3sac";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  if (s == "sac") return Algo::kSac;
  if (s == "d2sac") return Algo::kD2sac;
  if (s == "rs_dsac") return Algo::kRsDsac;
  if (s == "rs_d3sac") return Algo::kRsD3sac;
  throw ConfigError("unknown algorithm '" + s + "' (expected sac, d2sac, rs_dsac or rs_d3sac)");
}

inline bool uses_diffusion(Algo a) { return a == Algo::kD2sac || a == Algo::kRsD3sac; }
inline bool uses_quantiles(Algo a) { return a == Algo::kRsDsac || a == Algo::kRsD3sac; }

struct TrainConfig {
  int iterations = 200;
  int transitions_per_iteration = 1000;
  int batch_size = 512;
  std::size_t buffer_capacity = 5'000'000;
  double actor_lr = 2e-4;
  double critic_lr = 2e-3;
  double temperature = 0.05;
  double soft_update = 0.005;
  double discount = 0.95;
  int diffusion_steps = 5;
  double beta_min = 0.1;
  double beta_max = 10.0;
  double huber_kappa = 1.0;
  double dual_step = 1.0;
  int quantiles = 64;
  double cvar_alpha = 0.75;
  int updates_per_iteration = 1;
  double grad_clip = 10.0;
  bool reshape_at_sample = false;
  std::vector<int> hidden{256, 256};

  /// Lower-tail level of the return distribution used by the risk Q.
  double phi() const { return 1.0 - cvar_alpha; }

  void validate() const {
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (transitions_per_iteration < 1) throw ConfigError("transitions_per_iteration must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be >= 1");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(soft_update >= 0.0 && soft_update <= 1.0)) throw ConfigError("soft_update must lie in [0, 1]");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
    if (diffusion_steps < 1) throw ConfigError("diffusion_steps must be >= 1");
    if (!(huber_kappa > 0.0)) throw ConfigError("huber_kappa must be positive");
    if (!(dual_step > 0.0)) throw ConfigError("dual_step must be positive");
    if (quantiles < 1) throw ConfigError("quantiles must be >= 1");
    if (!(cvar_alpha > 0.0 && cvar_alpha < 1.0)) throw ConfigError("cvar_alpha must lie in (0, 1)");
    if (updates_per_iteration < 0) throw ConfigError("updates_per_iteration must be >= 0");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    for (int h : hidden)
      if (h < 1) throw ConfigError("hidden widths must be positive");
  }
};

// ---------------------------------------------------------------------------
// Minibatch losses

struct Batch {
  Mat states;
  Mat next_states;
  std::vector<int> actions;
  Vec rewards;
};

/// Gathers stored transitions into network-ready matrices. With `reshape`,
/// rewards are rebuilt from the stored raw parts using `lambda`.
inline Batch make_batch(const std::vector<Transition>& items, int d_max, bool reshape = false,
                        double lambda = 0.0) {
  if (items.empty()) throw ArgumentError("empty batch");
  const auto n = static_cast<Eigen::Index>(items.front().state.size());
  const auto b = static_cast<Eigen::Index>(items.size());
  Batch out;
  out.states.resize(n, b);
  out.next_states.resize(n, b);
  out.rewards.resize(b);
  out.actions.resize(items.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& t = items[static_cast<std::size_t>(i)];
    out.states.col(i) = state_features(t.state, d_max);
    out.next_states.col(i) = state_features(t.next_state, d_max);
    out.actions[static_cast<std::size_t>(i)] = t.action;
    out.rewards(i) = reshape ? -t.vaoi_sum - lambda * t.cost : t.reward;
  }
  return out;
}

template <class ActorT>
Mat policy_probs(const ActorT& actor, const Mat& states, Rng& rng) {
  return softmax_columns(actor.logits(states, rng));
}

/// y = r + gamma * (pi_hat(s')^T min_i Q_hat_i(s') + psi * H(pi_hat(s')))
template <class ActorT>
Vec td_target_scalar(const Vec& rewards, const Mat& next_states, const ActorT& target_actor,
                     const ScalarCritic& target1, const ScalarCritic& target2, double gamma,
                     double psi, Rng& rng) {
  const Mat probs = policy_probs(target_actor, next_states, rng);
  const Mat q = min_q(target1.forward(next_states), target2.forward(next_states));
  Vec y(rewards.size());
  for (Eigen::Index c = 0; c < rewards.size(); ++c)
    y(c) = rewards(c) + gamma * (probs.col(c).dot(q.col(c)) + psi * policy_entropy(Vec(probs.col(c))));
  return y;
}

/// mean over the batch of sum_i (y - Q_i(s, a))^2; gradients accumulate into g1/g2.
inline double critic_loss_scalar(const Batch& batch, const Vec& targets, const ScalarCritic& c1,
                                 const ScalarCritic& c2, ScalarCritic* g1 = nullptr,
                                 ScalarCritic* g2 = nullptr) {
  const auto b = batch.states.cols();
  if (b == 0) throw ArgumentError("empty batch");
  const double inv_b = 1.0 / static_cast<double>(b);
  double loss = 0.0;
  const ScalarCritic* critics[2] = {&c1, &c2};
  ScalarCritic* grads[2] = {g1, g2};
  for (int i = 0; i < 2; ++i) {
    Mlp::Cache cache;
    const Mat q = critics[i]->forward(batch.states, cache);
    Mat g = Mat::Zero(q.rows(), q.cols());
    for (Eigen::Index c = 0; c < b; ++c) {
      const int a = batch.actions[static_cast<std::size_t>(c)];
      const double diff = targets(c) - q(a, c);
      loss += diff * diff * inv_b;
      g(a, c) = -2.0 * diff * inv_b;
    }
    if (grads[i]) critics[i]->backward(cache, g, *grads[i]);
  }
  return loss;
}

/// Actor objective for an already-run forward pass:
/// mean over the batch of -(pi^T q + psi * H(pi)).
template <class ActorT>
double actor_loss_from_pass(const ActorT& actor, const typename ActorT::Pass& pass, const Mat& q,
                            double psi, ActorT* grads = nullptr) {
  const auto b = pass.probs.cols();
  if (q.rows() != pass.probs.rows() || q.cols() != b)
    throw ArgumentError("actor_loss: q-values must be (N+1) x batch");
  const double inv_b = 1.0 / static_cast<double>(b);
  double loss = 0.0;
  Mat g_logits(pass.probs.rows(), b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Vec p = pass.probs.col(c);
    const Vec qc = q.col(c);
    loss -= (p.dot(qc) + psi * policy_entropy(p)) * inv_b;
    const Vec g_p = -(qc + psi * entropy_grad(p)) * inv_b;
    g_logits.col(c) = softmax_backward(p, g_p);
  }
  if (grads) actor.backward(pass, g_logits, *grads);
  return loss;
}

template <class ActorT>
double actor_loss(const Mat& states, const ActorT& actor, const Mat& q, double psi, Rng& rng,
                  ActorT* grads = nullptr) {
  return actor_loss_from_pass(actor, actor.forward(states, rng), q, psi, grads);
}

/// min of the two online scalar critics, (N+1) x batch.
inline Mat scalar_q_values(const ScalarCritic& c1, const ScalarCritic& c2, const Mat& states) {
  return min_q(c1.forward(states), c2.forward(states));
}

/// Per-action CVaR_phi of the per-index minimum of two quantile critics.
inline Mat risk_q_values(const QuantileCritic& c1, const QuantileCritic& c2, const Mat& states,
                         double phi) {
  const Mat merged = min_q(c1.forward(states), c2.forward(states));
  Mat q(c1.n_actions(), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c)
    for (int a = 0; a < c1.n_actions(); ++a) q(a, c) = cvar_from_quantiles(c1.quantiles(merged, a, c), phi);
  return q;
}

/// Per-action mean of the per-index minimum of two quantile critics.
inline Mat mean_q_values(const QuantileCritic& c1, const QuantileCritic& c2, const Mat& states) {
  const Mat merged = min_q(c1.forward(states), c2.forward(states));
  Mat q(c1.n_actions(), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c)
    for (int a = 0; a < c1.n_actions(); ++a) q(a, c) = mean_from_quantiles(c1.quantiles(merged, a, c));
  return q;
}

/// Distributional TD targets, n_quantiles x batch: one a' ~ pi_hat(s') per
/// transition, then r + gamma * (min(sigma_hat1, sigma_hat2)(s', a') - psi log pi_hat(a'|s')).
template <class ActorT>
Mat distributional_targets(const Vec& rewards, const Mat& next_states, const ActorT& target_actor,
                           const QuantileCritic& target1, const QuantileCritic& target2,
                           double gamma, double psi, Rng& rng) {
  const Mat probs = policy_probs(target_actor, next_states, rng);
  const Mat merged = min_q(target1.forward(next_states), target2.forward(next_states));
  Mat t(target1.n_quantiles(), rewards.size());
  for (Eigen::Index c = 0; c < rewards.size(); ++c) {
    const Vec p = probs.col(c);
    const int a = sample_categorical(p, rng);
    const double log_pi = std::log(std::max(p(a), kEntropyFloor));
    t.col(c) = (rewards(c) + gamma * (target1.quantiles(merged, a, c).array() - psi * log_pi)).matrix();
  }
  return t;
}

/// Sum over both critics of the batch-mean quantile Huber loss.
inline double distributional_loss(const Batch& batch, const Mat& targets, const QuantileCritic& c1,
                                  const QuantileCritic& c2, double kappa,
                                  QuantileCritic* g1 = nullptr, QuantileCritic* g2 = nullptr) {
  const auto b = batch.states.cols();
  if (b == 0) throw ArgumentError("empty batch");
  const double inv_b = 1.0 / static_cast<double>(b);
  const int nq = c1.n_quantiles();
  const Vec taus = quantile_midpoints(nq);
  double loss = 0.0;
  const QuantileCritic* critics[2] = {&c1, &c2};
  QuantileCritic* grads[2] = {g1, g2};
  for (int i = 0; i < 2; ++i) {
    Mlp::Cache cache;
    const Mat out = critics[i]->forward(batch.states, cache);
    Mat g = Mat::Zero(out.rows(), out.cols());
    Vec gp(nq);
    for (Eigen::Index c = 0; c < b; ++c) {
      const int a = batch.actions[static_cast<std::size_t>(c)];
      const QuantileSet pred = critics[i]->quantiles(out, a, c);
      loss += quantile_huber_loss(pred, targets.col(c), kappa, taus, &gp) * inv_b;
      g.block(static_cast<Eigen::Index>(a) * nq, c, nq, 1) = gp * inv_b;
    }
    if (grads[i]) critics[i]->backward(cache, g, *grads[i]);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Trainer

struct IterationMetrics {
  int iteration = 0;
  double mean_reward = 0.0;
  double lambda = 0.0;
  double eta = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double wall_seconds = 0.0;
  int updates = 0;
};

/// Type-erased view of a trainer, used by the harness.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual Algo algo() const = 0;
  virtual const EnvConfig& env_config() const = 0;
  virtual const TrainConfig& train_config() const = 0;
  virtual IterationMetrics train_iteration() = 0;
  /// Action probabilities for a VAoI vector (one chain sample for diffusion actors).
  virtual Vec action_probs(const std::vector<int>& vaoi, Rng& rng) const = 0;
  virtual const LagrangeState& lagrange() const = 0;
  virtual void set_lagrange(const LagrangeState& ls) = 0;
  virtual std::size_t replay_size() const = 0;
  /// Every network parameter, named, for checkpoints.
  virtual ParamRefs all_params() = 0;
  /// Online and target parameters in matching order.
  virtual ParamRefs online_params() = 0;
  virtual ParamRefs target_params() = 0;
};

template <class ActorT, class CriticT>
class Trainer final : public Agent {
  static_assert(std::is_same_v<ActorT, DiffusionActor> || std::is_same_v<ActorT, MlpActor>);
  static_assert(std::is_same_v<CriticT, ScalarCritic> || std::is_same_v<CriticT, QuantileCritic>);

 public:
  static constexpr bool kDiffusion = std::is_same_v<ActorT, DiffusionActor>;
  static constexpr bool kDistributional = std::is_same_v<CriticT, QuantileCritic>;

  Trainer(EnvConfig env_config, TrainConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), env_(std::move(env_config)), replay_(cfg_.buffer_capacity) {
    cfg_.validate();
    std::seed_seq seq{seed, std::uint64_t{0x5eed'a1}, std::uint64_t{0xc0ffee}};
    std::uint64_t words[2];
    seq.generate(words, words + 2);
    rng_.seed(words[0]);
    Rng init_rng(words[1]);
    env_.reset(seed);

    const int n = env_.config().n_users;
    const int a = env_.config().n_actions();
    if constexpr (kDiffusion) {
      ActorArch arch;
      arch.hidden = cfg_.hidden;
      actor_ = DiffusionActor(n, a, DiffusionSchedule::build(cfg_.diffusion_steps, cfg_.beta_min, cfg_.beta_max),
                              arch, init_rng);
    } else {
      actor_ = MlpActor(n, a, cfg_.hidden, init_rng);
    }
    if constexpr (kDistributional) {
      critic1_ = QuantileCritic(n, a, cfg_.quantiles, cfg_.hidden, init_rng);
      critic2_ = QuantileCritic(n, a, cfg_.quantiles, cfg_.hidden, init_rng);
    } else {
      critic1_ = ScalarCritic(n, a, cfg_.hidden, init_rng);
      critic2_ = ScalarCritic(n, a, cfg_.hidden, init_rng);
    }
    target_actor_ = actor_;
    target1_ = critic1_;
    target2_ = critic2_;
    actor_opt_ = Adam(actor_.params(), {cfg_.actor_lr, 0.9, 0.999, 1e-8, cfg_.grad_clip});
    critic1_opt_ = Adam(critic1_.params("critic1"), {cfg_.critic_lr, 0.9, 0.999, 1e-8, cfg_.grad_clip});
    critic2_opt_ = Adam(critic2_.params("critic2"), {cfg_.critic_lr, 0.9, 0.999, 1e-8, cfg_.grad_clip});
  }

  Algo algo() const override {
    if constexpr (kDiffusion) return kDistributional ? Algo::kRsD3sac : Algo::kD2sac;
    else return kDistributional ? Algo::kRsDsac : Algo::kSac;
  }

  const EnvConfig& env_config() const override { return env_.config(); }
  const TrainConfig& train_config() const override { return cfg_; }
  const LagrangeState& lagrange() const override { return lagrange_; }
  void set_lagrange(const LagrangeState& ls) override { lagrange_ = ls; }
  std::size_t replay_size() const override { return replay_.size(); }
  const ReplayBuffer& replay() const { return replay_; }

  ActorT& actor() { return actor_; }
  CriticT& critic1() { return critic1_; }
  CriticT& critic2() { return critic2_; }

  Vec action_probs(const std::vector<int>& vaoi, Rng& rng) const override {
    const Mat s = state_features(vaoi, env_.config().d_max);
    return softmax_columns(actor_.logits(s, rng)).col(0);
  }

  IterationMetrics train_iteration() override {
    const auto start = std::chrono::steady_clock::now();
    IterationMetrics m;
    m.iteration = ++iteration_;
    const int d_max = env_.config().d_max;
    double reward_sum = 0.0;
    for (int t = 0; t < cfg_.transitions_per_iteration; ++t) {
      const std::vector<int> s = env_.state().vaoi;
      const Mat feat = state_features(s, d_max);
      const Vec probs = softmax_columns(actor_.logits(feat, rng_)).col(0);
      const int a = sample_categorical(probs, rng_);
      const StepOutcome o = env_.step(a, lagrange_.lambda);
      Transition tr;
      tr.state = s;
      tr.action = a;
      tr.next_state = o.next_state.vaoi;
      tr.reward = o.reward;
      tr.vaoi_sum = vaoi_sum(env_.config().reward_post_transition ? o.next_state.vaoi : s);
      tr.cost = o.cost;
      replay_.push(std::move(tr));
      lagrange_ = running_cost_update(lagrange_, o.cost);
      reward_sum += o.reward;
    }
    lagrange_ = lagrange_update(lagrange_, env_.config().eta_max, cfg_.dual_step);

    if (replay_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
      for (int u = 0; u < cfg_.updates_per_iteration; ++u) {
        const auto [lc, la] = update_step();
        m.critic_loss += lc;
        m.actor_loss += la;
        ++m.updates;
      }
      if (m.updates > 0) {
        m.critic_loss /= m.updates;
        m.actor_loss /= m.updates;
      }
    }
    m.mean_reward = reward_sum / cfg_.transitions_per_iteration;
    m.lambda = lagrange_.lambda;
    m.eta = lagrange_.eta;
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
  }

  /// One critic step, one actor step, one soft target update. Returns (critic, actor) losses.
  std::pair<double, double> update_step() {
    const auto idx = replay_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
    std::vector<Transition> items;
    items.reserve(idx.size());
    for (std::size_t i : idx) items.push_back(replay_.at(i));
    const Batch batch = make_batch(items, env_.config().d_max, cfg_.reshape_at_sample, lagrange_.lambda);

    CriticT g1 = critic1_.zeros_like();
    CriticT g2 = critic2_.zeros_like();
    double critic_loss;
    if constexpr (kDistributional) {
      const Mat targets = distributional_targets(batch.rewards, batch.next_states, target_actor_, target1_,
                                                 target2_, cfg_.discount, cfg_.temperature, rng_);
      critic_loss = distributional_loss(batch, targets, critic1_, critic2_, cfg_.huber_kappa, &g1, &g2);
    } else {
      const Vec y = td_target_scalar(batch.rewards, batch.next_states, target_actor_, target1_, target2_,
                                     cfg_.discount, cfg_.temperature, rng_);
      critic_loss = critic_loss_scalar(batch, y, critic1_, critic2_, &g1, &g2);
    }
    critic1_opt_.step(critic1_.params("critic1"), g1.params("critic1"));
    critic2_opt_.step(critic2_.params("critic2"), g2.params("critic2"));

    Mat q;
    if constexpr (kDistributional) {
      q = risk_q_values(critic1_, critic2_, batch.states, cfg_.phi());
    } else {
      q = scalar_q_values(critic1_, critic2_, batch.states);
    }
    ActorT ga = actor_.zeros_like();
    const double actor_loss_value = actor_loss(batch.states, actor_, q, cfg_.temperature, rng_, &ga);
    actor_opt_.step(actor_.params(), ga.params());

    soft_update(target_params(), online_params(), cfg_.soft_update);
    return {critic_loss, actor_loss_value};
  }

  ParamRefs online_params() override {
    ParamRefs p = actor_.params("actor");
    for (auto& q : critic1_.params("critic1")) p.push_back(q);
    for (auto& q : critic2_.params("critic2")) p.push_back(q);
    return p;
  }

  ParamRefs target_params() override {
    ParamRefs p = target_actor_.params("target_actor");
    for (auto& q : target1_.params("target_critic1")) p.push_back(q);
    for (auto& q : target2_.params("target_critic2")) p.push_back(q);
    return p;
  }

  ParamRefs all_params() override {
    ParamRefs p = online_params();
    for (auto& q : target_params()) p.push_back(q);
    return p;
  }

 private:
  TrainConfig cfg_;
  StatusUpdateEnv env_;
  ReplayBuffer replay_;
  LagrangeState lagrange_;
  Rng rng_;
  int iteration_ = 0;
  ActorT actor_, target_actor_;
  CriticT critic1_, critic2_, target1_, target2_;
  Adam actor_opt_, critic1_opt_, critic2_opt_;
};

using SacTrainer = Trainer<MlpActor, ScalarCritic>;
using D2sacTrainer = Trainer<DiffusionActor, ScalarCritic>;
using RsDsacTrainer = Trainer<MlpActor, QuantileCritic>;
using RsD3sacTrainer = Trainer<DiffusionActor, QuantileCritic>;

inline std::unique_ptr<Agent> make_agent(Algo algo, const EnvConfig& env, const TrainConfig& cfg,
                                         std::uint64_t seed) {
  switch (algo) {
    case Algo::kSac: return std::make_unique<SacTrainer>(env, cfg, seed);
    case Algo::kD2sac: return std::make_unique<D2sacTrainer>(env, cfg, seed);
    case Algo::kRsDsac: return std::make_unique<RsDsacTrainer>(env, cfg, seed);
    case Algo::kRsD3sac: return std::make_unique<RsD3sacTrainer>(env, cfg, seed);
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace vaoi
