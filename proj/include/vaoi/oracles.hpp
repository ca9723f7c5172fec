#pragma once

// Exact references for tiny instances: the VAoI state space is enumerated,
// transition matrices are built from the same one-slot kernel the simulator
// uses, and fixed policies or the fixed-lambda MDP are solved directly.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vaoi/env.hpp"
#include "vaoi/error.hpp"
#include "vaoi/risk_metrics.hpp"

namespace vaoi {

struct SmallInstance {
  EnvConfig env;
  double gamma = 0.95;
  double lambda = 0.0;

  static SmallInstance make(int n_users, int d_max, double rate, double p, double gamma = 0.95,
                            double lambda = 0.0) {
    SmallInstance s;
    s.env = EnvConfig::uniform(n_users, rate, p, d_max);
    s.gamma = gamma;
    s.lambda = lambda;
    return s;
  }

  int n_actions() const { return env.n_actions(); }

  int state_count() const {
    std::int64_t c = 1;
    for (int u = 0; u < env.n_users; ++u) c *= env.d_max + 1;
    if (c > 1'000'000) throw ConfigError("instance too large to enumerate");
    return static_cast<int>(c);
  }

  /// Mixed-radix decode; user 0 is the least significant digit.
  std::vector<int> decode(int index) const {
    std::vector<int> v(static_cast<std::size_t>(env.n_users));
    for (auto& x : v) {
      x = index % (env.d_max + 1);
      index /= env.d_max + 1;
    }
    return v;
  }

  int encode(const std::vector<int>& v) const {
    int idx = 0;
    for (std::size_t u = v.size(); u-- > 0;) idx = idx * (env.d_max + 1) + v[u];
    return idx;
  }
};

/// Deterministic stationary policy: one action per enumerated state.
using TabularPolicy = std::vector<int>;

inline TabularPolicy constant_policy(const SmallInstance& inst, int action) {
  return TabularPolicy(static_cast<std::size_t>(inst.state_count()), action);
}

inline Eigen::MatrixXd transition_matrix(const SmallInstance& inst, int action) {
  inst.env.validate();
  const int s_count = inst.state_count();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(s_count, s_count);
  for (int s = 0; s < s_count; ++s)
    for (const auto& o : enumerate_slot_outcomes(inst.env, inst.decode(s), action))
      p(s, inst.encode(o.next_vaoi)) += o.probability;
  return p;
}

inline Eigen::MatrixXd policy_transition_matrix(const SmallInstance& inst, const TabularPolicy& policy) {
  const int s_count = inst.state_count();
  if (static_cast<int>(policy.size()) != s_count) throw ArgumentError("policy must cover every state");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(s_count, s_count);
  for (int s = 0; s < s_count; ++s) {
    const int a = policy[static_cast<std::size_t>(s)];
    if (a < 0 || a >= inst.n_actions()) throw ArgumentError("policy action out of range");
    for (const auto& o : enumerate_slot_outcomes(inst.env, inst.decode(s), a))
      p(s, inst.encode(o.next_vaoi)) += o.probability;
  }
  return p;
}

inline double max_row_sum_error(const Eigen::MatrixXd& p) {
  return (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

/// Solves pi^T P = pi^T, sum(pi) = 1 by replacing one balance equation with
/// the normalization row.
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& p) {
  const auto n = p.rows();
  Eigen::MatrixXd a = p.transpose() - Eigen::MatrixXd::Identity(n, n);
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (lu.rank() < n) throw NumericalError("chain has no unique stationary distribution");
  Eigen::VectorXd pi = lu.solve(b);
  if ((a * pi - b).lpNorm<Eigen::Infinity>() > 1e-9 || pi.minCoeff() < -1e-9)
    throw NumericalError("stationary solve is inaccurate");
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

inline Eigen::VectorXd stationary_distribution(const SmallInstance& inst, const TabularPolicy& policy) {
  return stationary_distribution(policy_transition_matrix(inst, policy));
}

inline double stationary_average_vaoi(const SmallInstance& inst, const TabularPolicy& policy) {
  const Eigen::VectorXd pi = stationary_distribution(inst, policy);
  double avg = 0.0;
  for (int s = 0; s < pi.size(); ++s) avg += pi(s) * vaoi_sum(inst.decode(s)) / inst.env.n_users;
  return avg;
}

/// Exact CVaR of the pooled per-user VAoI under the stationary distribution.
inline double stationary_cvar(const SmallInstance& inst, const TabularPolicy& policy, double alpha) {
  const Eigen::VectorXd pi = stationary_distribution(inst, policy);
  const int n = inst.env.n_users;
  std::vector<double> mass(static_cast<std::size_t>(inst.env.d_max) + 1, 0.0);
  for (int s = 0; s < pi.size(); ++s)
    for (int v : inst.decode(s)) mass[static_cast<std::size_t>(v)] += pi(s) / n;
  std::vector<double> values(mass.size());
  for (std::size_t v = 0; v < mass.size(); ++v) values[v] = static_cast<double>(v);
  return weighted_cvar(values, mass, alpha);
}

inline double stationary_average_cost(const SmallInstance& inst, const TabularPolicy& policy) {
  const Eigen::VectorXd pi = stationary_distribution(inst, policy);
  double c = 0.0;
  for (int s = 0; s < pi.size(); ++s) c += policy[static_cast<std::size_t>(s)] != 0 ? pi(s) : 0.0;
  return c;
}

/// Runs the simulator under a tabular policy from reset(seed); records the
/// post-step state of every slot.
inline EvalTrace simulate_policy(const SmallInstance& inst, const TabularPolicy& policy,
                                 std::int64_t slots, std::uint64_t seed) {
  if (slots <= 0) throw ArgumentError("slots must be positive");
  StatusUpdateEnv env(inst.env);
  env.reset(seed);
  EvalTrace trace;
  trace.n_users = inst.env.n_users;
  trace.vaoi.reserve(static_cast<std::size_t>(slots) * static_cast<std::size_t>(trace.n_users));
  trace.actions.reserve(static_cast<std::size_t>(slots));
  for (std::int64_t t = 0; t < slots; ++t) {
    const int a = policy[static_cast<std::size_t>(inst.encode(env.state().vaoi))];
    const StepOutcome o = env.step(a, inst.lambda);
    trace.append(o.next_state.vaoi, a);
  }
  return trace;
}

inline double mc_cvar_oracle(const SmallInstance& inst, const TabularPolicy& policy, std::int64_t slots,
                             double alpha, std::uint64_t seed) {
  return empirical_cvar(simulate_policy(inst, policy, slots, seed), alpha);
}

/// r(s, a) with the same index convention as the simulator.
inline double expected_reward(const SmallInstance& inst, int s, int a) {
  const std::vector<int> v = inst.decode(s);
  if (!inst.env.reward_post_transition) return compute_reward(v, a, inst.lambda);
  double r = 0.0;
  for (const auto& o : enumerate_slot_outcomes(inst.env, v, a))
    r += o.probability * compute_reward(o.next_vaoi, a, inst.lambda);
  return r;
}

/// V = (I - gamma P_pi)^-1 r_pi
inline Eigen::VectorXd evaluate_policy(const SmallInstance& inst, const TabularPolicy& policy) {
  if (!(inst.gamma < 1.0)) throw ConfigError("policy evaluation needs gamma < 1");
  const Eigen::MatrixXd p = policy_transition_matrix(inst, policy);
  Eigen::VectorXd r(p.rows());
  for (int s = 0; s < r.size(); ++s) r(s) = expected_reward(inst, s, policy[static_cast<std::size_t>(s)]);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p.rows(), p.rows()) - inst.gamma * p;
  return a.partialPivLu().solve(r);
}

struct MdpSolution {
  TabularPolicy policy;
  Eigen::VectorXd values;
  Eigen::MatrixXd q;  // states x actions
  int sweeps = 0;
  std::vector<double> residuals;  // sup-norm change per sweep
};

inline constexpr double kTieTolerance = 1e-9;

/// Lowest action whose value is within a relative tolerance of the best.
inline int greedy_lowest(const Eigen::VectorXd& q) {
  const double best = q.maxCoeff();
  const double tol = kTieTolerance * std::max(1.0, std::abs(best));
  for (int a = 0; a < q.size(); ++a)
    if (q(a) >= best - tol) return a;
  return 0;
}

/// Value iteration on the fixed-lambda shaped reward, followed by greedy extraction.
inline MdpSolution solve_lagrangian_mdp(const SmallInstance& inst, double tol = 1e-10, int max_sweeps = 1'000'000) {
  if (!(inst.gamma < 1.0)) throw ConfigError("value iteration needs gamma < 1");
  const int s_count = inst.state_count();
  const int a_count = inst.n_actions();
  std::vector<Eigen::MatrixXd> p;
  Eigen::MatrixXd r(s_count, a_count);
  for (int a = 0; a < a_count; ++a) {
    p.push_back(transition_matrix(inst, a));
    for (int s = 0; s < s_count; ++s) r(s, a) = expected_reward(inst, s, a);
  }
  MdpSolution sol;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s_count);
  sol.q.resize(s_count, a_count);
  while (true) {
    for (int a = 0; a < a_count; ++a) sol.q.col(a) = r.col(a) + inst.gamma * p[static_cast<std::size_t>(a)] * v;
    const Eigen::VectorXd next = sol.q.rowwise().maxCoeff();
    const double res = (next - v).lpNorm<Eigen::Infinity>();
    v = next;
    sol.residuals.push_back(res);
    ++sol.sweeps;
    if (res < tol) break;
    if (sol.sweeps >= max_sweeps) throw NumericalError("value iteration did not converge");
  }
  for (int a = 0; a < a_count; ++a) sol.q.col(a) = r.col(a) + inst.gamma * p[static_cast<std::size_t>(a)] * v;
  sol.values = v;
  sol.policy.resize(static_cast<std::size_t>(s_count));
  for (int s = 0; s < s_count; ++s) sol.policy[static_cast<std::size_t>(s)] = greedy_lowest(sol.q.row(s).transpose());
  return sol;
}

struct EnumerationResult {
  TabularPolicy policy;
  Eigen::VectorXd values;
  std::int64_t policies_checked = 0;
};

/// Evaluates every deterministic stationary policy exactly and returns the
/// lexicographically first (state 0 most significant) one whose summed value
/// is within tolerance of the best.
inline EnumerationResult enumerate_policies(const SmallInstance& inst, std::int64_t limit = 1 << 20) {
  const int s_count = inst.state_count();
  const int a_count = inst.n_actions();
  double total = 1.0;
  for (int s = 0; s < s_count; ++s) total *= a_count;
  if (total > static_cast<double>(limit)) throw ConfigError("too many policies to enumerate");
  const auto count = static_cast<std::int64_t>(total);

  auto policy_at = [&](std::int64_t code) {
    TabularPolicy pol(static_cast<std::size_t>(s_count));
    for (int s = s_count; s-- > 0;) {
      pol[static_cast<std::size_t>(s)] = static_cast<int>(code % a_count);
      code /= a_count;
    }
    return pol;
  };

  std::vector<double> scores(static_cast<std::size_t>(count));
  double best = -INFINITY;
  for (std::int64_t c = 0; c < count; ++c) {
    scores[static_cast<std::size_t>(c)] = evaluate_policy(inst, policy_at(c)).sum();
    best = std::max(best, scores[static_cast<std::size_t>(c)]);
  }
  const double tol = kTieTolerance * std::max(1.0, std::abs(best));
  EnumerationResult out;
  out.policies_checked = count;
  for (std::int64_t c = 0; c < count; ++c) {
    if (scores[static_cast<std::size_t>(c)] >= best - tol) {
      out.policy = policy_at(c);
      out.values = evaluate_policy(inst, out.policy);
      break;
    }
  }
  return out;
}

}  // namespace vaoi
