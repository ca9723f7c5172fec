#pragma once

// Multi-user status-update environment with version bookkeeping.
//
// Slot convention: the observed state already reflects the current slot's
// arrivals. A step resolves the scheduled transmission, scores the state the
// decision was taken on, then draws the next slot's arrivals.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vaoi/error.hpp"

namespace vaoi {

using Rng = std::mt19937_64;

struct EnvConfig {
  int n_users = 20;
  std::vector<double> arrival_rates = std::vector<double>(20, 0.75);
  double success_prob = 0.9;
  int d_max = 50;
  double eta_max = 0.85;
  // Score the post-transition VAoI instead of the decision-time VAoI.
  bool reward_post_transition = false;

  static EnvConfig uniform(int n_users, double rate, double success_prob, int d_max = 50,
                           double eta_max = 0.85) {
    EnvConfig c;
    c.n_users = n_users;
    c.arrival_rates.assign(static_cast<std::size_t>(std::max(n_users, 0)), rate);
    c.success_prob = success_prob;
    c.d_max = d_max;
    c.eta_max = eta_max;
    return c;
  }

  int n_actions() const { return n_users + 1; }

  void validate() const {
    if (n_users < 1) throw ConfigError("n_users must be positive");
    if (static_cast<int>(arrival_rates.size()) != n_users)
      throw ConfigError("arrival_rates must have one entry per user");
    for (double r : arrival_rates)
      if (!(r > 0.0 && r <= 1.0)) throw ConfigError("arrival rates must lie in (0, 1]");
    if (!(success_prob >= 0.0 && success_prob <= 1.0))
      throw ConfigError("success_prob must lie in [0, 1]");
    if (d_max < 1) throw ConfigError("d_max must be at least 1");
    if (!(eta_max > 0.0 && eta_max <= 1.0)) throw ConfigError("eta_max must lie in (0, 1]");
  }
};

struct EnvState {
  std::vector<int> vaoi;
  std::vector<std::int64_t> scheduler_versions;    // G
  std::vector<std::int64_t> destination_versions;  // B
  std::int64_t slot = 0;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepInfo {
  std::vector<bool> arrivals;
  bool success = false;
  std::vector<std::int64_t> raw_vaoi;  // G - B before truncation
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  int cost = 0;
  StepInfo info;
};

/// Injected randomness for trace replays. Unset fields are drawn from the rng.
struct StepOverrides {
  std::optional<bool> success;
  std::optional<std::vector<bool>> arrivals;
};

inline double vaoi_sum(const std::vector<int>& vaoi) {
  return static_cast<double>(std::accumulate(vaoi.begin(), vaoi.end(), 0LL));
}

/// r = -sum_n vaoi(n) - lambda * 1[action != 0]
inline double compute_reward(const std::vector<int>& vaoi, int action, double lambda) {
  return -vaoi_sum(vaoi) - (action != 0 ? lambda : 0.0);
}

inline double compute_reward(const EnvState& state, int action, double lambda) {
  return compute_reward(state.vaoi, action, lambda);
}

/// One-slot update of a single user's truncated VAoI. This is the kernel the
/// exact oracles build their transition matrices from.
inline int advance_vaoi(int vaoi, bool delivered, bool arrived, int d_max) {
  return std::min((delivered ? 0 : vaoi) + (arrived ? 1 : 0), d_max);
}

/// A weighted successor of a truncated VAoI vector under one action.
struct SlotOutcome {
  std::vector<int> next_vaoi;
  double probability = 0.0;
};

/// Enumerates every (success, arrival pattern) combination for one slot.
inline std::vector<SlotOutcome> enumerate_slot_outcomes(const EnvConfig& config,
                                                        const std::vector<int>& vaoi,
                                                        int action) {
  const int n = config.n_users;
  std::vector<SlotOutcome> out;
  const bool transmits = action != 0;
  for (int s = 0; s < (transmits ? 2 : 1); ++s) {
    const bool success = transmits && s == 1;
    const double p_success =
        transmits ? (success ? config.success_prob : 1.0 - config.success_prob) : 1.0;
    if (p_success == 0.0) continue;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      double prob = p_success;
      SlotOutcome o;
      o.next_vaoi.resize(static_cast<std::size_t>(n));
      for (int u = 0; u < n; ++u) {
        const bool arrived = (mask >> u) & 1U;
        const double r = config.arrival_rates[static_cast<std::size_t>(u)];
        prob *= arrived ? r : 1.0 - r;
        const bool delivered = success && action == u + 1;
        o.next_vaoi[static_cast<std::size_t>(u)] =
            advance_vaoi(vaoi[static_cast<std::size_t>(u)], delivered, arrived, config.d_max);
      }
      if (prob == 0.0) continue;
      o.probability = prob;
      out.push_back(std::move(o));
    }
  }
  return out;
}

class StatusUpdateEnv {
 public:
  explicit StatusUpdateEnv(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  Rng& rng() { return rng_; }

  /// G = B = 0 for every user, slot 0, rng reseeded.
  const EnvState& reset(std::uint64_t seed) {
    rng_.seed(seed);
    const auto n = static_cast<std::size_t>(config_.n_users);
    state_.vaoi.assign(n, 0);
    state_.scheduler_versions.assign(n, 0);
    state_.destination_versions.assign(n, 0);
    state_.slot = 0;
    return state_;
  }

  /// Advances one slot and returns the outcome; the environment keeps the next state.
  StepOutcome step(int action, double lambda = 0.0, const StepOverrides& overrides = {}) {
    StepOutcome out = peek(state_, action, lambda, overrides);
    state_ = out.next_state;
    return out;
  }

  /// Applies one slot to an arbitrary state using this environment's rng.
  StepOutcome peek(const EnvState& state, int action, double lambda,
                   const StepOverrides& overrides = {}) {
    const int n = config_.n_users;
    if (action < 0 || action > n)
      throw ArgumentError("action " + std::to_string(action) + " outside [0, " +
                          std::to_string(n) + "]");
    if (static_cast<int>(state.vaoi.size()) != n) throw ArgumentError("state size mismatch");
    if (overrides.arrivals && static_cast<int>(overrides.arrivals->size()) != n)
      throw ArgumentError("forced arrivals must have one entry per user");

    StepOutcome out;
    out.next_state = state;
    EnvState& next = out.next_state;
    out.cost = action != 0 ? 1 : 0;

    if (action != 0) {
      bool success;
      if (overrides.success) {
        success = *overrides.success;
      } else {
        success = std::bernoulli_distribution(config_.success_prob)(rng_);
      }
      out.info.success = success;
      if (success) {
        const auto u = static_cast<std::size_t>(action - 1);
        next.destination_versions[u] = next.scheduler_versions[u];
      }
    }

    if (!config_.reward_post_transition) out.reward = compute_reward(state, action, lambda);

    out.info.arrivals.resize(static_cast<std::size_t>(n));
    out.info.raw_vaoi.resize(static_cast<std::size_t>(n));
    for (std::size_t u = 0; u < static_cast<std::size_t>(n); ++u) {
      bool arrived;
      if (overrides.arrivals) {
        arrived = (*overrides.arrivals)[u];
      } else {
        arrived = std::bernoulli_distribution(config_.arrival_rates[u])(rng_);
      }
      out.info.arrivals[u] = arrived;
      if (arrived) ++next.scheduler_versions[u];
      const std::int64_t gap = next.scheduler_versions[u] - next.destination_versions[u];
      out.info.raw_vaoi[u] = gap;
      next.vaoi[u] = static_cast<int>(std::min<std::int64_t>(gap, config_.d_max));
    }
    ++next.slot;

    if (config_.reward_post_transition) out.reward = compute_reward(next, action, lambda);
    return out;
  }

 private:
  EnvConfig config_;
  EnvState state_;
  Rng rng_;
};

/// Writes the optional per-slot trace: t, action, success, cost, vaoi_1..vaoi_N.
class TraceWriter {
 public:
  TraceWriter(std::ostream& os, int n_users) : os_(os) {
    os_ << "t,action,success,cost";
    for (int u = 1; u <= n_users; ++u) os_ << ",vaoi_" << u;
    os_ << '\n';
  }

  void write(const StepOutcome& o, int action) {
    os_ << o.next_state.slot << ',' << action << ',' << (o.info.success ? 1 : 0) << ','
        << o.cost;
    for (int v : o.next_state.vaoi) os_ << ',' << v;
    os_ << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace vaoi
