#pragma once

#include <random>
#include <string>
#include <vector>

#include "vaoi/env.hpp"
#include "vaoi/error.hpp"

namespace vaoi {

enum class HeuristicKind { kGreedyMaxVaoi, kRandomBudget, kAlwaysIdle, kAlwaysTransmit };

inline std::string to_string(HeuristicKind k) {
  switch (k) {
    case HeuristicKind::kGreedyMaxVaoi: return "greedy_max_vaoi";
    case HeuristicKind::kRandomBudget: return "random_budget";
    case HeuristicKind::kAlwaysIdle: return "always_idle";
    case HeuristicKind::kAlwaysTransmit: return "always_transmit";
  }
  return "?";
}

inline HeuristicKind parse_heuristic(const std::string& s) {
  if (s == "greedy_max_vaoi") return HeuristicKind::kGreedyMaxVaoi;
  if (s == "random_budget") return HeuristicKind::kRandomBudget;
  if (s == "always_idle") return HeuristicKind::kAlwaysIdle;
  if (s == "always_transmit") return HeuristicKind::kAlwaysTransmit;
  throw ArgumentError("unknown heuristic '" + s +
                      "' (expected greedy_max_vaoi, random_budget, always_idle or always_transmit)");
}

/// Running transmission-cost average seen by budget-aware heuristics.
struct BudgetState {
  double eta_max = 0.85;
  double running_cost = 0.0;
  long slots = 0;

  void record(int cost) {
    ++slots;
    running_cost += (cost - running_cost) / static_cast<double>(slots);
  }
};

/// Lowest user index with the largest VAoI, as an action (1-based).
inline int max_vaoi_action(const std::vector<int>& vaoi) {
  std::size_t best = 0;
  for (std::size_t u = 1; u < vaoi.size(); ++u)
    if (vaoi[u] > vaoi[best]) best = u;
  return static_cast<int>(best) + 1;
}

inline int heuristic_action(HeuristicKind kind, const std::vector<int>& vaoi, const BudgetState& budget,
                            Rng& rng) {
  if (vaoi.empty()) throw ArgumentError("empty state");
  switch (kind) {
    case HeuristicKind::kGreedyMaxVaoi: {
      const int a = max_vaoi_action(vaoi);
      return vaoi[static_cast<std::size_t>(a - 1)] > 0 && budget.running_cost <= budget.eta_max ? a : 0;
    }
    case HeuristicKind::kRandomBudget: {
      if (!std::bernoulli_distribution(budget.eta_max)(rng)) return 0;
      return 1 + std::uniform_int_distribution<int>(0, static_cast<int>(vaoi.size()) - 1)(rng);
    }
    case HeuristicKind::kAlwaysIdle: return 0;
    case HeuristicKind::kAlwaysTransmit: return max_vaoi_action(vaoi);
  }
  return 0;
}

}  // namespace vaoi
