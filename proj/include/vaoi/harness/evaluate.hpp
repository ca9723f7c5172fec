#pragma once

// Frozen-policy evaluation: runs a scheduler on fresh environment seeds,
// pools the post-step VAoI samples and reports the summary metrics.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vaoi/agents.hpp"
#include "vaoi/env.hpp"
#include "vaoi/error.hpp"
#include "vaoi/harness/config.hpp"
#include "vaoi/harness/heuristics.hpp"
#include "vaoi/risk_metrics.hpp"

namespace vaoi {

/// Chooses an action from the current VAoI vector and the running cost state.
using Scheduler = std::function<int(const std::vector<int>& vaoi, const BudgetState& budget, Rng& rng)>;

inline Scheduler agent_scheduler(const Agent& agent, bool greedy) {
  return [&agent, greedy](const std::vector<int>& v, const BudgetState&, Rng& rng) {
    const Vec probs = agent.action_probs(v, rng);
    return greedy ? argmax_lowest(probs) : sample_categorical(probs, rng);
  };
}

inline Scheduler heuristic_scheduler(HeuristicKind kind) {
  return [kind](const std::vector<int>& v, const BudgetState& b, Rng& rng) {
    return heuristic_action(kind, v, b, rng);
  };
}

inline constexpr std::uint64_t kEvalSeedOffset = 1'000'000;

/// Evaluation episodes never reuse a training seed.
inline std::uint64_t eval_seed(std::uint64_t train_seed, int index) {
  return train_seed + kEvalSeedOffset + static_cast<std::uint64_t>(index);
}

struct EpisodeResult {
  std::uint64_t seed = 0;
  EvalTrace trace;
  std::vector<double> eta;  // running cost after each slot
};

/// One episode from reset(seed); the policy rng is derived from the same seed.
inline EpisodeResult run_episode(const EnvConfig& env_config, const Scheduler& scheduler, int slots,
                                 std::uint64_t seed) {
  if (slots <= 0) throw ArgumentError("evaluation needs at least one slot");
  StatusUpdateEnv env(env_config);
  env.reset(seed);
  Rng policy_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  EpisodeResult ep;
  ep.seed = seed;
  ep.trace.n_users = env_config.n_users;
  ep.eta.reserve(static_cast<std::size_t>(slots));
  BudgetState budget;
  budget.eta_max = env_config.eta_max;
  for (int t = 0; t < slots; ++t) {
    const int a = scheduler(env.state().vaoi, budget, policy_rng);
    const StepOutcome o = env.step(a);
    budget.record(o.cost);
    ep.trace.append(o.next_state.vaoi, a);
    ep.eta.push_back(budget.running_cost);
  }
  return ep;
}

struct EvalResult {
  double avg_vaoi = 0.0;
  std::map<double, double> cvar;
  double avg_cost = 0.0;
  int slots = 0;
  std::uint64_t seed = 0;  // first episode seed
  double eta_max = 0.0;
  bool constraint_satisfied = false;
  std::vector<EpisodeResult> episodes;

  /// Every episode's VAoI entries pooled together.
  std::vector<double> pooled() const {
    std::vector<double> all;
    for (const auto& e : episodes) all.insert(all.end(), e.trace.vaoi.begin(), e.trace.vaoi.end());
    return all;
  }
};

inline EvalResult evaluate_scheduler(const EnvConfig& env, const Scheduler& scheduler, const EvalConfig& cfg,
                                     std::uint64_t train_seed) {
  if (cfg.slots <= 0) throw ArgumentError("evaluation needs at least one slot");
  cfg.validate();
  EvalResult r;
  r.slots = cfg.slots;
  r.eta_max = env.eta_max;
  r.seed = eval_seed(train_seed, 0);
  std::vector<int> actions;
  for (int i = 0; i < cfg.episodes; ++i) {
    r.episodes.push_back(run_episode(env, scheduler, cfg.slots, eval_seed(train_seed, i)));
    const auto& a = r.episodes.back().trace.actions;
    actions.insert(actions.end(), a.begin(), a.end());
  }
  const std::vector<double> samples = r.pooled();
  double sum = 0.0;
  for (double v : samples) sum += v;
  r.avg_vaoi = sum / static_cast<double>(samples.size());
  for (double alpha : cfg.alphas) r.cvar[alpha] = empirical_cvar(samples, alpha);
  r.avg_cost = average_cost(actions);
  r.constraint_satisfied = r.avg_cost <= env.eta_max;
  return r;
}

inline std::string format_alpha(double a) {
  std::ostringstream ss;
  ss << a;
  return ss.str();
}

inline Json eval_to_json(const EvalResult& r) {
  Json cvar = Json::object();
  for (const auto& [a, v] : r.cvar) cvar[format_alpha(a)] = v;
  Json episodes = Json::array();
  for (const auto& e : r.episodes)
    episodes.push_back({{"seed", e.seed},
                        {"avg_vaoi", average_vaoi(e.trace)},
                        {"avg_cost", average_cost(e.trace)}});
  return {{"avg_vaoi", r.avg_vaoi},
          {"cvar", cvar},
          {"avg_cost", r.avg_cost},
          {"slots", r.slots},
          {"seed", r.seed},
          {"eta_max", r.eta_max},
          {"constraint_satisfied", r.constraint_satisfied},
          {"episodes", episodes}};
}

/// eval.json, samples.csv (episode,t,user,vaoi) and eta.csv (episode,t,eta).
inline void write_eval_outputs(const EvalResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "samples.csv");
    out << "episode,t,user,vaoi\n";
    for (std::size_t e = 0; e < r.episodes.size(); ++e) {
      const auto& tr = r.episodes[e].trace;
      for (std::size_t t = 0; t < tr.slots(); ++t)
        for (int u = 0; u < tr.n_users; ++u) out << e << ',' << t + 1 << ',' << u + 1 << ',' << tr.at(t, u) << '\n';
    }
  }
  {
    std::ofstream out(dir / "eta.csv");
    out << "episode,t,eta\n";
    out.precision(17);
    for (std::size_t e = 0; e < r.episodes.size(); ++e)
      for (std::size_t t = 0; t < r.episodes[e].eta.size(); ++t)
        out << e << ',' << t + 1 << ',' << r.episodes[e].eta[t] << '\n';
  }
  // written last: its presence marks a finished evaluation
  std::ofstream out(dir / "eval.json");
  out << eval_to_json(r).dump(2) << '\n';
}

}  // namespace vaoi
