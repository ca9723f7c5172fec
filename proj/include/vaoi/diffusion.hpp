#pragma once

// Diffusion-based discrete policy: a variance-preserving noise schedule and a
// K-step reverse denoising chain whose final sample is mapped to action
// probabilities with a softmax. Also holds the plain MLP-softmax actor used by
// the non-diffusion ablations, behind the same interface.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vaoi/error.hpp"
#include "vaoi/nn.hpp"

namespace vaoi {

using Rng = std::mt19937_64;

/// Precomputed tables of the K-step chain. Index 0 holds the k = 0 boundary
/// (alpha_bar = 1); valid steps are 1..K.
struct DiffusionSchedule {
  int steps = 0;
  double beta_min = 0.1;
  double beta_max = 10.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> beta_tilde;

  static DiffusionSchedule build(int steps, double beta_min, double beta_max) {
    if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
    if (!(beta_min > 0.0) || !(beta_max >= beta_min))
      throw ConfigError("diffusion schedule needs 0 < beta_min <= beta_max");
    DiffusionSchedule s;
    s.steps = steps;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    const auto n = static_cast<std::size_t>(steps) + 1;
    s.beta.assign(n, 0.0);
    s.alpha.assign(n, 1.0);
    s.alpha_bar.assign(n, 1.0);
    s.beta_tilde.assign(n, 0.0);
    const double kk = static_cast<double>(steps);
    for (int k = 1; k <= steps; ++k) {
      const auto i = static_cast<std::size_t>(k);
      const double exponent =
          beta_min / kk + (2.0 * k - 1.0) / (2.0 * kk * kk) * (beta_max - beta_min);
      s.beta[i] = -std::expm1(-exponent);
      s.alpha[i] = 1.0 - s.beta[i];
      s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
      s.beta_tilde[i] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    }
    return s;
  }

  void check_step(int k) const {
    if (k < 1 || k > steps)
      throw ArgumentError("diffusion step " + std::to_string(k) + " outside [1, " +
                          std::to_string(steps) + "]");
  }

  std::size_t at(int k) const { return static_cast<std::size_t>(k); }
};

/// x0 = x_k / sqrt(abar_k) - sqrt(1/abar_k - 1) * e, with e the bounded noise estimate.
inline Mat x0_from_noise(const DiffusionSchedule& s, const Mat& x_k, const Mat& e, int k) {
  s.check_step(k);
  const double ab = s.alpha_bar[s.at(k)];
  return x_k / std::sqrt(ab) - std::sqrt(1.0 / ab - 1.0) * e;
}

/// mu = (x_k - beta_k / sqrt(1 - abar_k) * e) / sqrt(alpha_k)
inline Mat mean_from_noise(const DiffusionSchedule& s, const Mat& x_k, const Mat& e, int k) {
  s.check_step(k);
  const auto i = s.at(k);
  return (x_k - s.beta[i] / std::sqrt(1.0 - s.alpha_bar[i]) * e) / std::sqrt(s.alpha[i]);
}

/// Posterior mean written in terms of the reconstructed clean sample.
inline Mat mean_from_x0(const DiffusionSchedule& s, const Mat& x_k, const Mat& x0, int k) {
  s.check_step(k);
  const auto i = s.at(k);
  const double ab = s.alpha_bar[i];
  const double ab_prev = s.alpha_bar[i - 1];
  return (std::sqrt(s.alpha[i]) * (1.0 - ab_prev) / (1.0 - ab)) * x_k +
         (std::sqrt(ab_prev) * s.beta[i] / (1.0 - ab)) * x0;
}

struct ActorArch {
  int time_embedding_dim = 16;
  int time_hidden = 32;
  int time_out = 16;
  std::vector<int> hidden{256, 256};
};

/// Gaussian draws consumed by one pass of the reverse chain.
struct ChainNoise {
  Mat x_start;         // x_K
  std::vector<Mat> z;  // z[k], k = 1..K (index 0 unused)
};

inline Mat standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

/// Draw order: x_K first, then z_K down to z_1.
inline ChainNoise draw_chain_noise(int steps, Eigen::Index dim, Eigen::Index batch, Rng& rng) {
  ChainNoise n;
  n.x_start = standard_normal(dim, batch, rng);
  n.z.assign(static_cast<std::size_t>(steps) + 1, Mat());
  for (int k = steps; k >= 1; --k) n.z[static_cast<std::size_t>(k)] = standard_normal(dim, batch, rng);
  return n;
}

/// Noise predictor eps_theta(x_k, k, s) and the reverse chain built on it.
///
/// Wiring: sinusoidal(k) -> dense(time_hidden, Mish) -> dense(time_out) gives
/// the step embedding; the trunk consumes [x_k, state, embedding] and ends in a
/// linear layer of width N+1. The trunk's raw output is eps_theta; the chain
/// always applies tanh to it before use, which is the bounded output layer.
class DiffusionActor {
 public:
  struct StepCache {
    int k = 0;
    Mlp::Cache trunk;
    Mlp::Cache time;
    Mat bounded_noise;
  };

  struct Pass {
    Mat logits;  // x_0
    Mat probs;
    std::vector<StepCache> steps;
  };

  DiffusionActor() = default;

  DiffusionActor(int state_dim, int n_actions, DiffusionSchedule schedule, const ActorArch& arch,
                 Rng& rng)
      : state_dim_(state_dim),
        n_actions_(n_actions),
        embedding_dim_(arch.time_embedding_dim),
        schedule_(std::move(schedule)),
        time_mlp_(arch.time_embedding_dim,
                  {{arch.time_hidden, Activation::kMish}, {arch.time_out, Activation::kIdentity}}, rng),
        trunk_(n_actions + state_dim + arch.time_out, mish_stack(arch.hidden, n_actions), rng) {}

  int state_dim() const { return state_dim_; }
  int n_actions() const { return n_actions_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

  Vec step_embedding(int k, Mlp::Cache* cache = nullptr) const {
    const Mat in = sinusoidal_embedding(static_cast<double>(k), embedding_dim_);
    return cache ? Vec(time_mlp_.forward(in, *cache)) : Vec(time_mlp_.forward(in));
  }

  /// Raw eps_theta(x_k, k, s) before the bounding tanh.
  Mat noise_raw(const Mat& x_k, int k, const Mat& states) const {
    schedule_.check_step(k);
    return trunk_.forward(trunk_input(x_k, states, step_embedding(k)));
  }

  /// tanh(eps_theta(x_k, k, s)), entries in (-1, 1).
  Mat predict_noise(const Mat& x_k, int k, const Mat& states) const {
    return noise_raw(x_k, k, states).array().tanh().matrix();
  }

  Mat logits(const Mat& states, Rng& rng) const {
    return forward(states, draw_chain_noise(schedule_.steps, n_actions_, states.cols(), rng)).logits;
  }

  Pass forward(const Mat& states, Rng& rng) const {
    return forward(states, draw_chain_noise(schedule_.steps, n_actions_, states.cols(), rng));
  }

  /// Runs x_K -> ... -> x_0 with the given noise and records what backward needs.
  Pass forward(const Mat& states, const ChainNoise& noise) const {
    check_states(states);
    if (noise.x_start.rows() != n_actions_ || noise.x_start.cols() != states.cols())
      throw ArgumentError("chain noise has the wrong shape");
    Pass pass;
    Mat x = noise.x_start;
    for (int k = schedule_.steps; k >= 1; --k) {
      const auto i = schedule_.at(k);
      StepCache sc;
      sc.k = k;
      const Vec emb = step_embedding(k, &sc.time);
      const Mat raw = trunk_.forward(trunk_input(x, states, emb), sc.trunk);
      sc.bounded_noise = raw.array().tanh().matrix();
      x = mean_from_noise(schedule_, x, sc.bounded_noise, k) +
          std::sqrt(schedule_.beta_tilde[i]) * noise.z[i];
      pass.steps.push_back(std::move(sc));
    }
    pass.logits = x;
    pass.probs = softmax_columns(x);
    return pass;
  }

  /// Backpropagates dL/dx_0 through every denoising step into `grads`.
  void backward(const Pass& pass, const Mat& grad_logits, DiffusionActor& grads) const {
    Mat g = grad_logits;  // dL/dx_{k-1}
    for (auto it = pass.steps.rbegin(); it != pass.steps.rend(); ++it) {
      const auto i = schedule_.at(it->k);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule_.alpha[i]);
      const double coef = schedule_.beta[i] / std::sqrt(1.0 - schedule_.alpha_bar[i]);
      // x_{k-1} = mu + const; mu = (x_k - coef * tanh(raw)) / sqrt(alpha)
      const Mat g_raw = ((-coef * inv_sqrt_alpha) * g.array() *
                         (1.0 - it->bounded_noise.array().square()))
                            .matrix();
      const Mat g_in = trunk_.backward(it->trunk, g_raw, grads.trunk_);
      const Mat g_emb = g_in.bottomRows(g_in.rows() - n_actions_ - state_dim_).rowwise().sum();
      time_mlp_.backward(it->time, g_emb, grads.time_mlp_);
      g = inv_sqrt_alpha * g + g_in.topRows(n_actions_);
    }
  }

  DiffusionActor zeros_like() const {
    DiffusionActor z = *this;
    z.time_mlp_ = time_mlp_.zeros_like();
    z.trunk_ = trunk_.zeros_like();
    return z;
  }

  ParamRefs params(const std::string& prefix = "actor") {
    ParamRefs p = time_mlp_.params(prefix + ".time");
    for (auto& q : trunk_.params(prefix + ".trunk")) p.push_back(q);
    return p;
  }

 private:
  Mat trunk_input(const Mat& x_k, const Mat& states, const Vec& emb) const {
    Mat in(x_k.rows() + states.rows() + emb.size(), x_k.cols());
    in.topRows(x_k.rows()) = x_k;
    in.middleRows(x_k.rows(), states.rows()) = states;
    in.bottomRows(emb.size()) = emb.replicate(1, x_k.cols());
    return in;
  }

  void check_states(const Mat& states) const {
    if (states.rows() != state_dim_) throw ArgumentError("state dimension mismatch");
  }

  int state_dim_ = 0;
  int n_actions_ = 0;
  int embedding_dim_ = 16;
  DiffusionSchedule schedule_;
  Mlp time_mlp_;
  Mlp trunk_;
};

/// eps-form reconstruction of x_0 from a single denoising input.
inline Mat reconstruct_x0(const DiffusionActor& actor, const Mat& x_k, int k, const Mat& states) {
  return x0_from_noise(actor.schedule(), x_k, actor.predict_noise(x_k, k, states), k);
}

inline Mat posterior_mean(const DiffusionActor& actor, const Mat& x_k, int k, const Mat& states) {
  return mean_from_noise(actor.schedule(), x_k, actor.predict_noise(x_k, k, states), k);
}

/// x_{k-1} = mu_theta(x_k, k, s) + sqrt(beta_tilde_k) * noise
inline Mat denoise_step(const DiffusionActor& actor, const Mat& x_k, int k, const Mat& states,
                        const Mat& noise) {
  if (noise.rows() != x_k.rows() || noise.cols() != x_k.cols())
    throw ArgumentError("denoise_step: noise dimension mismatch");
  const auto& s = actor.schedule();
  return posterior_mean(actor, x_k, k, states) + std::sqrt(s.beta_tilde[s.at(k)]) * noise;
}

/// State -> hidden Mish layers -> N+1 logits -> softmax.
class MlpActor {
 public:
  struct Pass {
    Mat logits;
    Mat probs;
    Mlp::Cache cache;
  };

  MlpActor() = default;
  MlpActor(int state_dim, int n_actions, const std::vector<int>& hidden, Rng& rng)
      : state_dim_(state_dim), n_actions_(n_actions), net_(state_dim, mish_stack(hidden, n_actions), rng) {}

  int state_dim() const { return state_dim_; }
  int n_actions() const { return n_actions_; }

  Mat logits(const Mat& states, Rng&) const { return net_.forward(states); }

  Pass forward(const Mat& states, Rng&) const {
    if (states.rows() != state_dim_) throw ArgumentError("state dimension mismatch");
    Pass p;
    p.logits = net_.forward(states, p.cache);
    p.probs = softmax_columns(p.logits);
    return p;
  }

  void backward(const Pass& pass, const Mat& grad_logits, MlpActor& grads) const {
    net_.backward(pass.cache, grad_logits, grads.net_);
  }

  MlpActor zeros_like() const {
    MlpActor z = *this;
    z.net_ = net_.zeros_like();
    return z;
  }

  ParamRefs params(const std::string& prefix = "actor") { return net_.params(prefix + ".mlp"); }

 private:
  int state_dim_ = 0;
  int n_actions_ = 0;
  Mlp net_;
};

inline constexpr double kEntropyFloor = 1e-8;

struct PolicyDistribution {
  Vec probs;
};

/// H = -sum_a pi(a) log max(pi(a), 1e-8)
inline double policy_entropy(const Vec& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    h -= probs(i) * std::log(std::max(probs(i), kEntropyFloor));
  return h;
}

inline double policy_entropy(const PolicyDistribution& d) { return policy_entropy(d.probs); }

/// dH/dpi for the floored entropy.
inline Vec entropy_grad(const Vec& probs) {
  Vec g(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    g(i) = probs(i) > kEntropyFloor ? -(std::log(probs(i)) + 1.0) : -std::log(kEntropyFloor);
  return g;
}

/// Pulls dL/dpi back through the softmax: dL/dx = pi * (g - pi^T g).
inline Vec softmax_backward(const Vec& probs, const Vec& grad_probs) {
  return probs.cwiseProduct((grad_probs.array() - probs.dot(grad_probs)).matrix());
}

/// Scaled VAoI features in [0, 1] fed to every network.
inline Vec state_features(const std::vector<int>& vaoi, int d_max) {
  Vec f(static_cast<Eigen::Index>(vaoi.size()));
  for (std::size_t i = 0; i < vaoi.size(); ++i)
    f(static_cast<Eigen::Index>(i)) = static_cast<double>(vaoi[i]) / d_max;
  return f;
}

template <class Actor>
PolicyDistribution sample_action_distribution(const Actor& actor, const Vec& state, Rng& rng) {
  const Mat s = state;
  return {softmax_columns(actor.logits(s, rng)).col(0)};
}

inline int sample_categorical(const Vec& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

inline int argmax_lowest(const Vec& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

}  // namespace vaoi
