#pragma once

// Trajectory metrics: pooled average VAoI, empirical CVaR of the pooled VAoI
// samples, and average transmission cost.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "vaoi/error.hpp"

namespace vaoi {

/// Per-slot VAoI vectors (row-major, slots x n_users) and the actions taken.
struct EvalTrace {
  int n_users = 0;
  std::vector<int> vaoi;
  std::vector<int> actions;

  std::size_t slots() const { return actions.size(); }

  void append(const std::vector<int>& v, int action) {
    if (static_cast<int>(v.size()) != n_users) throw ArgumentError("trace row has the wrong width");
    vaoi.insert(vaoi.end(), v.begin(), v.end());
    actions.push_back(action);
  }

  int at(std::size_t t, int n) const { return vaoi[t * static_cast<std::size_t>(n_users) + n]; }

  /// Every VAoI entry across users and slots.
  std::vector<double> pooled() const { return {vaoi.begin(), vaoi.end()}; }
};

inline double average_vaoi(const EvalTrace& trace) {
  if (trace.vaoi.empty()) throw ArgumentError("average_vaoi: empty trace");
  return std::accumulate(trace.vaoi.begin(), trace.vaoi.end(), 0.0) / static_cast<double>(trace.vaoi.size());
}

inline double average_cost(const std::vector<int>& actions) {
  if (actions.empty()) throw ArgumentError("average_cost: empty action sequence");
  const auto sent = std::count_if(actions.begin(), actions.end(), [](int a) { return a != 0; });
  return static_cast<double>(sent) / static_cast<double>(actions.size());
}

inline double average_cost(const EvalTrace& trace) { return average_cost(trace.actions); }

/// eta(t): running mean of the cost up to and including slot t.
inline std::vector<double> running_cost_series(const std::vector<int>& actions) {
  std::vector<double> eta(actions.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    sum += actions[t] != 0 ? 1.0 : 0.0;
    eta[t] = sum / static_cast<double>(t + 1);
  }
  return eta;
}

namespace detail {

inline void check_cvar_args(const std::vector<double>& samples, double alpha) {
  if (samples.empty()) throw ArgumentError("CVaR of an empty sample set");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("CVaR level alpha must lie in (0, 1)");
}

}  // namespace detail

/// min over z of z + sum_i [x_i - z]_+ / ((1 - alpha) m). The objective is
/// piecewise linear with breakpoints at the samples, so the minimum is attained
/// at one of them.
inline double cvar_rockafellar_uryasev(std::vector<double> samples, double alpha) {
  detail::check_cvar_args(samples, alpha);
  std::sort(samples.begin(), samples.end());
  const double scale = 1.0 / ((1.0 - alpha) * static_cast<double>(samples.size()));
  // suffix[i] = sum of samples[i..m)
  std::vector<double> suffix(samples.size() + 1, 0.0);
  for (std::size_t i = samples.size(); i-- > 0;) suffix[i] = suffix[i + 1] + samples[i];
  double best = INFINITY;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double z = samples[i];
    const auto above = static_cast<std::size_t>(std::upper_bound(samples.begin(), samples.end(), z) - samples.begin());
    const double excess = suffix[above] - z * static_cast<double>(samples.size() - above);
    best = std::min(best, z + scale * excess);
  }
  return best;
}

/// (1/k) * (sum of the floor(k) largest samples + (k - floor(k)) * next largest), k = (1 - alpha) m.
inline double cvar_tail_average(std::vector<double> samples, double alpha) {
  detail::check_cvar_args(samples, alpha);
  std::sort(samples.begin(), samples.end(), std::greater<>());
  const double k = (1.0 - alpha) * static_cast<double>(samples.size());
  const auto whole = static_cast<std::size_t>(std::floor(k));
  double sum = 0.0;
  for (std::size_t i = 0; i < whole && i < samples.size(); ++i) sum += samples[i];
  const double frac = k - static_cast<double>(whole);
  if (frac > 0.0 && whole < samples.size()) sum += frac * samples[whole];
  return sum / k;
}

inline constexpr double kCvarAgreementTol = 1e-9;

/// Empirical CVaR_alpha of the upper tail. Both closed forms are evaluated and
/// must agree.
inline double empirical_cvar(const std::vector<double>& samples, double alpha) {
  const double ru = cvar_rockafellar_uryasev(samples, alpha);
  const double tail = cvar_tail_average(samples, alpha);
  if (std::abs(ru - tail) > kCvarAgreementTol * std::max(1.0, std::abs(tail)))
    throw NumericalError("CVaR forms disagree");
  return tail;
}

inline double empirical_cvar(const EvalTrace& trace, double alpha) {
  return empirical_cvar(trace.pooled(), alpha);
}

/// Upper-tail CVaR of a finite weighted distribution (weights summing to 1).
inline double weighted_cvar(const std::vector<double>& values, const std::vector<double>& weights, double alpha) {
  if (values.empty() || values.size() != weights.size()) throw ArgumentError("weighted_cvar: bad input");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("CVaR level alpha must lie in (0, 1)");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  const double tail = 1.0 - alpha;
  double mass = 0.0;
  double sum = 0.0;
  for (std::size_t i : order) {
    const double take = std::min(weights[i], tail - mass);
    if (take <= 0.0) break;
    sum += take * values[i];
    mass += take;
  }
  return sum / tail;
}

}  // namespace vaoi
