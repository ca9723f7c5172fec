#pragma once

// Scalar and quantile (distributional) critics plus the pure functions that
// act on their outputs: double-critic minima, the quantile Huber loss and
// risk/mean extraction from quantile sets.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vaoi/error.hpp"
#include "vaoi/nn.hpp"

namespace vaoi {

/// Quantile locations of one return distribution (uniform Dirac mixture).
using QuantileSet = Vec;

/// State -> Q-value for each of the N+1 actions.
class ScalarCritic {
 public:
  ScalarCritic() = default;
  ScalarCritic(int state_dim, int n_actions, const std::vector<int>& hidden, std::mt19937_64& rng)
      : n_actions_(n_actions), net_(state_dim, mish_stack(hidden, n_actions), rng) {}

  int n_actions() const { return n_actions_; }
  int outputs_per_action() const { return 1; }

  Mat forward(const Mat& states) const { return net_.forward(states); }
  Mat forward(const Mat& states, Mlp::Cache& cache) const { return net_.forward(states, cache); }
  void backward(const Mlp::Cache& cache, const Mat& grad_out, ScalarCritic& grads) const {
    net_.backward(cache, grad_out, grads.net_);
  }

  ScalarCritic zeros_like() const {
    ScalarCritic z = *this;
    z.net_ = net_.zeros_like();
    return z;
  }
  ParamRefs params(const std::string& prefix) { return net_.params(prefix); }

 private:
  int n_actions_ = 0;
  Mlp net_;
};

/// State -> (N+1) x n_quantiles quantile values; row a * n_quantiles + j.
class QuantileCritic {
 public:
  QuantileCritic() = default;
  QuantileCritic(int state_dim, int n_actions, int n_quantiles, const std::vector<int>& hidden,
                 std::mt19937_64& rng)
      : n_actions_(n_actions),
        n_quantiles_(n_quantiles),
        net_(state_dim, mish_stack(hidden, n_actions * n_quantiles), rng) {
    if (n_quantiles < 1) throw ConfigError("quantile count must be >= 1");
  }

  int n_actions() const { return n_actions_; }
  int n_quantiles() const { return n_quantiles_; }
  int outputs_per_action() const { return n_quantiles_; }

  Mat forward(const Mat& states) const { return net_.forward(states); }
  Mat forward(const Mat& states, Mlp::Cache& cache) const { return net_.forward(states, cache); }
  void backward(const Mlp::Cache& cache, const Mat& grad_out, QuantileCritic& grads) const {
    net_.backward(cache, grad_out, grads.net_);
  }

  /// Quantile set of action `a` for batch column `col` of a forward output.
  QuantileSet quantiles(const Mat& out, int a, Eigen::Index col) const {
    return out.block(static_cast<Eigen::Index>(a) * n_quantiles_, col, n_quantiles_, 1);
  }

  QuantileCritic zeros_like() const {
    QuantileCritic z = *this;
    z.net_ = net_.zeros_like();
    return z;
  }
  ParamRefs params(const std::string& prefix) { return net_.params(prefix); }

 private:
  int n_actions_ = 0;
  int n_quantiles_ = 0;
  Mlp net_;
};

/// Elementwise minimum of two critic outputs.
inline Mat min_q(const Mat& q1, const Mat& q2) {
  if (q1.rows() != q2.rows() || q1.cols() != q2.cols())
    throw ArgumentError("min_q: critic outputs differ in shape");
  return q1.cwiseMin(q2);
}

/// Per-index minimum of two quantile sets.
inline QuantileSet target_quantiles(const QuantileSet& a, const QuantileSet& b) {
  if (a.size() != b.size()) throw ArgumentError("target_quantiles: quantile count mismatch");
  return a.cwiseMin(b);
}

/// tau_hat_j = (2j - 1) / (2N), j = 1..N
inline Vec quantile_midpoints(int n) {
  if (n < 1) throw ArgumentError("quantile count must be >= 1");
  Vec t(n);
  for (int j = 0; j < n; ++j) t(j) = (2.0 * j + 1.0) / (2.0 * n);
  return t;
}

/// rho^kappa_tau(u): asymmetric Huber penalty.
inline double quantile_huber(double u, double tau, double kappa) {
  const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  const double a = std::abs(u);
  return a <= kappa ? w * 0.5 * u * u : w * kappa * (a - 0.5 * kappa);
}

/// d rho / du
inline double quantile_huber_grad(double u, double tau, double kappa) {
  const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
  return std::abs(u) <= kappa ? w * u : w * kappa * (u < 0.0 ? -1.0 : 1.0);
}

/// L = (1/N) sum_j sum_j' rho_{tau_j}(target_j' - pred_j). If `grad_pred` is
/// given it receives dL/dpred.
inline double quantile_huber_loss(const QuantileSet& pred, const Vec& targets, double kappa,
                                  const Vec& taus, Vec* grad_pred = nullptr) {
  if (!(kappa > 0.0)) throw ConfigError("Huber threshold kappa must be positive");
  if (taus.size() != pred.size()) throw ArgumentError("one tau per predicted quantile required");
  const double n = static_cast<double>(pred.size());
  if (grad_pred) grad_pred->setZero(pred.size());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < pred.size(); ++j) {
    for (Eigen::Index jp = 0; jp < targets.size(); ++jp) {
      const double u = targets(jp) - pred(j);
      loss += quantile_huber(u, taus(j), kappa);
      if (grad_pred) (*grad_pred)(j) -= quantile_huber_grad(u, taus(j), kappa) / n;
    }
  }
  return loss / n;
}

inline double quantile_huber_loss(const QuantileSet& pred, const Vec& targets, double kappa,
                                  Vec* grad_pred = nullptr) {
  return quantile_huber_loss(pred, targets, kappa, quantile_midpoints(static_cast<int>(pred.size())),
                             grad_pred);
}

/// Number of leading midpoints with tau_hat_j <= phi (at least one).
inline int cvar_quantile_count(int n, double phi) {
  int count = 0;
  for (int j = 0; j < n; ++j)
    if ((2.0 * j + 1.0) / (2.0 * n) <= phi) ++count;
  return std::max(count, 1);
}

/// Lower-tail CVaR_phi: mean of quantiles whose midpoint is <= phi. When no
/// midpoint qualifies, the lowest-index quantile is used.
inline double cvar_from_quantiles(const QuantileSet& q, double phi) {
  if (!(phi > 0.0 && phi <= 1.0)) throw ConfigError("CVaR level phi must lie in (0, 1]");
  if (q.size() == 0) throw ArgumentError("empty quantile set");
  const int m = cvar_quantile_count(static_cast<int>(q.size()), phi);
  return q.head(m).mean();
}

inline double mean_from_quantiles(const QuantileSet& q) {
  if (q.size() == 0) throw ArgumentError("empty quantile set");
  return q.mean();
}

}  // namespace vaoi
