// Command-line front end: train, evaluate, sweep, oracle, plot.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vaoi/vaoi.hpp"

namespace fs = std::filesystem;
using namespace vaoi;

namespace {

struct CommonConfigArgs {
  std::string config;
  std::string profile = "desk";
};

ExperimentConfig base_config(const CommonConfigArgs& a) {
  return a.config.empty() ? ExperimentConfig::from_profile(a.profile) : load_config(a.config);
}

void add_config_args(CLI::App* cmd, CommonConfigArgs& a) {
  cmd->add_option("--config", a.config, "Config file (.json or sectioned key/value text)");
  cmd->add_option("--profile", a.profile, "Base profile when no config file is given: desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
}

template <class T>
std::vector<T> parse_list(const std::string& csv, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ArgumentError("not a number: '" + s + "'");
}

std::uint64_t to_seed(const std::string& s) { return static_cast<std::uint64_t>(std::stoull(s)); }
Algo to_algo(const std::string& s) { return parse_algo(s); }

void print_progress(const IterationMetrics& m, int total) {
  std::cerr << "iter " << m.iteration << "/" << total << "  reward " << m.mean_reward << "  lambda " << m.lambda
            << "  eta " << m.eta << "  critic " << m.critic_loss << "  actor " << m.actor_loss << "  ("
            << m.wall_seconds << " s)\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  CommonConfigArgs cfg;
  std::string algo;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> updates;
  std::optional<double> alpha;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg = base_config(a.cfg);
  if (!a.algo.empty()) cfg.algo = parse_algo(a.algo);
  if (a.seed) cfg.seed = *a.seed;
  if (a.iterations) cfg.train.iterations = *a.iterations;
  if (a.updates) cfg.train.updates_per_iteration = *a.updates;
  if (a.alpha) cfg.train.cvar_alpha = *a.alpha;
  cfg.validate();
  const fs::path out =
      a.out.empty() ? default_output_root() / (to_string(cfg.algo) + "_seed" + std::to_string(cfg.seed)) : fs::path(a.out);
  const int total = cfg.train.iterations;
  train_run(cfg, out, [&](const IterationMetrics& m) {
    if (!a.quiet) print_progress(m, total);
  });
  std::cout << out.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  CommonConfigArgs cfg;
  std::string checkpoint;
  std::string heuristic;
  std::optional<int> slots;
  std::optional<int> episodes;
  std::string alphas;
  std::optional<std::uint64_t> seed;
  bool greedy = false;
  std::string out;
};

int cmd_evaluate(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.heuristic.empty())
    throw ArgumentError("give exactly one of --checkpoint or --heuristic");
  ExperimentConfig cfg = base_config(a.cfg);
  if (a.slots) cfg.eval.slots = *a.slots;
  if (a.episodes) cfg.eval.episodes = *a.episodes;
  if (!a.alphas.empty()) cfg.eval.alphas = parse_list<double>(a.alphas, to_double);
  if (a.greedy) cfg.eval.greedy = true;

  EvalResult result;
  fs::path out;
  if (!a.checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
    EnvConfig env = ck.agent->env_config();
    if (!a.cfg.config.empty()) {
      check_env_compatible(env, cfg.env);
      env = cfg.env;
    }
    result = evaluate_scheduler(env, agent_scheduler(*ck.agent, cfg.eval.greedy), cfg.eval, a.seed.value_or(ck.seed));
    out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "eval" : fs::path(a.out);
  } else {
    const HeuristicKind kind = parse_heuristic(a.heuristic);
    result = evaluate_scheduler(cfg.env, heuristic_scheduler(kind), cfg.eval, a.seed.value_or(cfg.seed));
    out = a.out.empty() ? default_output_root() / ("eval_" + a.heuristic) : fs::path(a.out);
  }
  write_eval_outputs(result, out);
  std::cout << eval_to_json(result).dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  CommonConfigArgs cfg;
  std::string param;
  std::string values;
  std::string algos = "sac,d2sac,rs_dsac,rs_d3sac";
  std::string seeds = "1,2,3";
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  const ExperimentConfig base = base_config(a.cfg);
  SweepSpec spec;
  spec.param = parse_sweep_param(a.param);
  spec.values = parse_list<double>(a.values, to_double);
  spec.algos = parse_list<Algo>(a.algos, to_algo);
  spec.seeds = parse_list<std::uint64_t>(a.seeds, to_seed);
  const fs::path out = a.out.empty() ? default_output_root() / ("sweep_" + a.param) : fs::path(a.out);
  const auto rows = run_sweep(base, spec, out, [](double v, Algo algo, std::uint64_t seed) {
    std::cerr << "run value=" << v << " algo=" << to_string(algo) << " seed=" << seed << '\n';
  });
  std::cout << (out / "sweep.csv").string() << " (" << rows.size() << " rows)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct OracleArgs {
  int n_users = 1;
  int d_max = 3;
  std::string rates = "0.5";
  double p = 0.9;
  double gamma = 0.95;
  double lambda = 0.3;
  std::string policy = "optimal";
  std::string alphas = "0.5,0.75,0.9,0.95";
  std::int64_t mc_slots = 0;
  std::uint64_t seed = 1;
  bool enumerate = false;
};

int cmd_oracle(const OracleArgs& a) {
  SmallInstance inst;
  inst.env.n_users = a.n_users;
  inst.env.d_max = a.d_max;
  inst.env.success_prob = a.p;
  inst.env.arrival_rates = parse_list<double>(a.rates, to_double);
  if (inst.env.arrival_rates.size() == 1)
    inst.env.arrival_rates.assign(static_cast<std::size_t>(std::max(a.n_users, 0)), inst.env.arrival_rates.front());
  inst.gamma = a.gamma;
  inst.lambda = a.lambda;
  inst.env.validate();
  if (a.n_users > 2 || a.d_max > 6) throw ArgumentError("oracle instances are limited to N <= 2 and d_max <= 6");

  Json report;
  report["instance"] = {{"n_users", a.n_users}, {"d_max", a.d_max}, {"arrival_rates", inst.env.arrival_rates},
                        {"success_prob", a.p},  {"gamma", a.gamma}, {"lambda", a.lambda}};
  TabularPolicy policy(static_cast<std::size_t>(inst.state_count()));
  if (a.policy == "optimal") {
    const MdpSolution sol = solve_lagrangian_mdp(inst);
    policy = sol.policy;
    report["value_iteration"] = {{"sweeps", sol.sweeps}, {"final_residual", sol.residuals.back()}};
    Json values = Json::array();
    for (int s = 0; s < inst.state_count(); ++s) values.push_back(sol.values(s));
    report["values"] = values;
    if (a.enumerate) {
      const EnumerationResult en = enumerate_policies(inst);
      report["enumeration"] = {{"policies_checked", en.policies_checked}, {"matches_value_iteration", en.policy == sol.policy}};
    }
  } else if (a.policy == "always_transmit" || a.policy == "always_idle" || a.policy == "max_vaoi") {
    for (int s = 0; s < inst.state_count(); ++s) {
      const auto v = inst.decode(s);
      int act = 0;
      if (a.policy == "always_transmit") act = max_vaoi_action(v);
      if (a.policy == "max_vaoi") act = v[static_cast<std::size_t>(max_vaoi_action(v) - 1)] > 0 ? max_vaoi_action(v) : 0;
      policy[static_cast<std::size_t>(s)] = act;
    }
  } else {
    throw ArgumentError("unknown oracle policy '" + a.policy + "' (optimal, always_transmit, always_idle, max_vaoi)");
  }
  report["policy_name"] = a.policy;
  Json table = Json::array();
  for (int s = 0; s < inst.state_count(); ++s)
    table.push_back({{"state", inst.decode(s)}, {"action", policy[static_cast<std::size_t>(s)]}});
  report["policy"] = table;
  report["avg_vaoi"] = stationary_average_vaoi(inst, policy);
  report["avg_cost"] = stationary_average_cost(inst, policy);
  Json cvar = Json::object();
  const auto alphas = parse_list<double>(a.alphas, to_double);
  for (double alpha : alphas) cvar[format_alpha(alpha)] = stationary_cvar(inst, policy, alpha);
  report["cvar"] = cvar;
  if (a.mc_slots > 0) {
    const EvalTrace tr = simulate_policy(inst, policy, a.mc_slots, a.seed);
    Json mc_cvar = Json::object();
    for (double alpha : alphas) mc_cvar[format_alpha(alpha)] = empirical_cvar(tr, alpha);
    report["monte_carlo"] = {{"slots", a.mc_slots}, {"seed", a.seed}, {"avg_vaoi", average_vaoi(tr)},
                             {"avg_cost", average_cost(tr)}, {"cvar", mc_cvar}};
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PlotArgs {
  std::string sweep_csv;
  std::string metrics;
  std::string out;
};

std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  header.clear();
  std::stringstream hs(line);
  std::string h;
  while (std::getline(hs, h, ',')) header.push_back(h);
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    for (std::size_t i = 0; i < header.size() && std::getline(ss, f, ','); ++i) cols[i].push_back(to_double(f));
  }
  return cols;
}

int cmd_plot(const PlotArgs& a) {
  if (a.sweep_csv.empty() == a.metrics.empty()) throw ArgumentError("give exactly one of --sweep-csv or --metrics");
  if (!a.sweep_csv.empty()) {
    const fs::path out = a.out.empty() ? fs::path(a.sweep_csv).parent_path() / "plots" : fs::path(a.out);
    for (const auto& f : write_sweep_plots(read_sweep_csv(a.sweep_csv), "param_value", out)) std::cout << f.string() << '\n';
    return 0;
  }
  const fs::path out = a.out.empty() ? fs::path(a.metrics).parent_path() / "plots" : fs::path(a.out);
  fs::create_directories(out);
  std::vector<std::string> header;
  const auto cols = read_numeric_csv(a.metrics, header);
  if (header.empty() || header.front() != "iteration") throw ArgumentError("'" + a.metrics + "' is not a metrics CSV");
  for (std::size_t c = 1; c < header.size(); ++c) {
    PlotSpec spec;
    spec.title = header[c] + " per iteration";
    spec.x_label = "iteration";
    spec.y_label = header[c];
    spec.series.push_back({header[c], cols[0], cols[c], {}, {}});
    const fs::path file = out / (header[c] + ".png");
    write_line_plot(spec, file);
    std::cout << file.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VAoI scheduling: training, evaluation, sweeps, exact oracles and plots"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one agent and write a run directory");
  add_config_args(t, train.cfg);
  t->add_option("--algo", train.algo, "sac, d2sac, rs_dsac or rs_d3sac");
  t->add_option("--seed", train.seed, "Training seed");
  t->add_option("--iterations", train.iterations, "Training iterations");
  t->add_option("--updates-per-iteration", train.updates, "Gradient rounds per iteration");
  t->add_option("--alpha", train.alpha, "CVaR confidence level (risk level phi = 1 - alpha)");
  t->add_option("--out", train.out, "Run directory (default: $VAOI_OUTPUT_ROOT/<algo>_seed<seed>)");
  t->add_flag("--quiet", train.quiet, "No per-iteration progress");

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint or a heuristic scheduler");
  add_config_args(e, ev.cfg);
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON");
  e->add_option("--heuristic", ev.heuristic, "greedy_max_vaoi, random_budget, always_idle or always_transmit");
  e->add_option("--slots", ev.slots, "Slots per episode");
  e->add_option("--episodes", ev.episodes, "Episodes (seeds train_seed + 1000000 + i)");
  e->add_option("--alphas", ev.alphas, "Comma-separated CVaR levels");
  e->add_option("--seed", ev.seed, "Training seed the evaluation seeds derive from");
  e->add_flag("--greedy", ev.greedy, "Take the most probable action instead of sampling");
  e->add_option("--out", ev.out, "Output directory");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train and evaluate over a parameter grid");
  add_config_args(s, sw.cfg);
  s->add_option("--param", sw.param, "eta_max, arrival_rate, success_prob, n_users or alpha")->required();
  s->add_option("--values", sw.values, "Comma-separated values")->required();
  s->add_option("--algos", sw.algos, "Comma-separated algorithms");
  s->add_option("--seeds", sw.seeds, "Comma-separated seeds");
  s->add_option("--out", sw.out, "Sweep root (default: $VAOI_OUTPUT_ROOT/sweep_<param>)");

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle", "Exact small-instance analysis, printed as JSON");
  o->add_option("--n-users", orc.n_users, "Users (1 or 2)");
  o->add_option("--d-max", orc.d_max, "VAoI cap (at most 6)");
  o->add_option("--rates", orc.rates, "Arrival rate, or one per user");
  o->add_option("--p", orc.p, "Transmission success probability");
  o->add_option("--gamma", orc.gamma, "Discount factor");
  o->add_option("--lambda", orc.lambda, "Fixed Lagrange multiplier");
  o->add_option("--policy", orc.policy, "optimal, always_transmit, always_idle or max_vaoi");
  o->add_option("--alphas", orc.alphas, "Comma-separated CVaR levels");
  o->add_option("--mc-slots", orc.mc_slots, "Also simulate this many slots");
  o->add_option("--seed", orc.seed, "Simulation seed");
  o->add_flag("--enumerate", orc.enumerate, "Cross-check value iteration by exhaustive policy enumeration");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render PNG plots from a sweep CSV or a run's metrics.csv");
  p->add_option("--sweep-csv", pl.sweep_csv, "sweep.csv from a sweep");
  p->add_option("--metrics", pl.metrics, "metrics.csv from a run");
  p->add_option("--out", pl.out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_evaluate(ev);
    if (*s) return cmd_sweep(sw);
    if (*o) return cmd_oracle(orc);
    if (*p) return cmd_plot(pl);
  } catch (const ConfigError& ex) {
    std::cerr << "configuration error: " << ex.what() << '\n';
    return 2;
  } catch (const ArgumentError& ex) {
    std::cerr << "argument error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
