// Trains a small RS-D3SAC scheduler for a handful of iterations and compares
// it with the greedy heuristic on a fresh evaluation episode.

#include <iostream>

#include "vaoi/agents.hpp"
#include "vaoi/harness/evaluate.hpp"

int main() {
  using namespace vaoi;
  const EnvConfig env = EnvConfig::uniform(3, 0.75, 0.9);
  TrainConfig cfg;
  cfg.iterations = 10;
  cfg.updates_per_iteration = 5;
  cfg.hidden = {64, 64};

  auto agent = make_agent(Algo::kRsD3sac, env, cfg, 7);
  for (int i = 0; i < cfg.iterations; ++i) {
    const IterationMetrics m = agent->train_iteration();
    std::cout << "iteration " << m.iteration << "  lambda " << m.lambda << "  eta " << m.eta << '\n';
  }

  EvalConfig eval;
  eval.slots = 2000;
  eval.alphas = {0.75, 0.95};
  const EvalResult learned = evaluate_scheduler(env, agent_scheduler(*agent, false), eval, 7);
  const EvalResult greedy = evaluate_scheduler(env, heuristic_scheduler(HeuristicKind::kGreedyMaxVaoi), eval, 7);
  std::cout << "rs_d3sac: " << eval_to_json(learned).dump() << '\n';
  std::cout << "greedy:   " << eval_to_json(greedy).dump() << '\n';
}
