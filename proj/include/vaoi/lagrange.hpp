#pragma once

#include <algorithm>
#include <cstdint>

namespace vaoi {

/// Dual multiplier for the transmission budget plus the running cost average.
struct LagrangeState {
  double lambda = 0.0;
  double eta = 0.0;         // mean of every cost observed so far
  std::int64_t steps = 0;   // global step counter l
};

/// eta <- eta + (c - eta) / l, after l <- l + 1.
inline LagrangeState running_cost_update(LagrangeState ls, double cost) {
  ++ls.steps;
  ls.eta += (cost - ls.eta) / static_cast<double>(ls.steps);
  return ls;
}

/// Projected dual ascent: lambda <- max(0, lambda + delta * (eta - eta_max)).
inline LagrangeState lagrange_update(LagrangeState ls, double eta_max, double delta) {
  ls.lambda = std::max(0.0, ls.lambda + delta * (ls.eta - eta_max));
  return ls;
}

}  // namespace vaoi
