#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "vaoi/harness/checkpoint.hpp"
#include "vaoi/harness/evaluate.hpp"
#include "vaoi/harness/plot.hpp"
#include "vaoi/harness/run.hpp"
#include "vaoi/harness/sweep.hpp"
#include "vaoi/oracles.hpp"

using namespace vaoi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vaoi_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.env = EnvConfig::uniform(2, 0.6, 0.9, 10);
  c.train.iterations = 3;
  c.train.transitions_per_iteration = 30;
  c.train.batch_size = 16;
  c.train.buffer_capacity = 1000;
  c.train.hidden = {8};
  c.train.diffusion_steps = 2;
  c.train.quantiles = 4;
  c.train.updates_per_iteration = 1;
  c.checkpoint_every = 2;
  c.eval.slots = 200;
  c.eval.alphas = {0.5, 0.75};
  return c;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST(Config, DefaultsMatchReferenceSetup) {
  const ExperimentConfig full = ExperimentConfig::full();
  EXPECT_EQ(full.env.n_users, 20);
  EXPECT_EQ(full.env.arrival_rates, std::vector<double>(20, 0.75));
  EXPECT_EQ(full.env.success_prob, 0.9);
  EXPECT_EQ(full.env.eta_max, 0.85);
  EXPECT_EQ(full.train.actor_lr, 2e-4);
  EXPECT_EQ(full.train.critic_lr, 2e-3);
  EXPECT_EQ(full.train.temperature, 0.05);
  EXPECT_EQ(full.train.soft_update, 0.005);
  EXPECT_EQ(full.train.discount, 0.95);
  EXPECT_EQ(full.train.transitions_per_iteration, 1000);
  EXPECT_EQ(full.eval.slots, 5000);
  EXPECT_EQ(full.eval.alphas, std::vector<double>{0.75});
  const ExperimentConfig desk = ExperimentConfig::desk();
  EXPECT_EQ(desk.env.n_users, 5);
  EXPECT_EQ(desk.train.iterations, 200);
  EXPECT_THROW(ExperimentConfig::from_profile("huge"), ConfigError);
}

TEST(Config, ParsesSectionedText) {
  const Json j = parse_config_text(
      "# comment\nprofile = \"desk\"\nalgo = \"rs_d3sac\"  # trailing\nseed = 7\n\n[env]\nn_users = 3\n"
      "arrival_rate = 0.5\n[train]\nhidden = [32, 16]\nreshape_at_sample = true\ncritic_lr = 1e-3\n"
      "[eval]\nalphas = [0.5, 0.9]\n");
  const ExperimentConfig c = config_from_json(j);
  EXPECT_EQ(c.profile, "desk");
  EXPECT_EQ(c.algo, Algo::kRsD3sac);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.env.n_users, 3);
  EXPECT_EQ(c.env.arrival_rates, std::vector<double>(3, 0.5));
  EXPECT_EQ(c.train.hidden, (std::vector<int>{32, 16}));
  EXPECT_TRUE(c.train.reshape_at_sample);
  EXPECT_EQ(c.train.critic_lr, 1e-3);
  EXPECT_EQ(c.train.iterations, 200);
  EXPECT_EQ(c.eval.alphas, (std::vector<double>{0.5, 0.9}));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config_text("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[env\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
  EXPECT_THROW(config_from_json(parse_config_text("colour = 1\n")), ConfigError);
  EXPECT_THROW(config_from_json(parse_config_text("[env]\nusers = 3\n")), ConfigError);
  EXPECT_THROW(config_from_json(parse_config_text("[env]\nn_users = \"three\"\n")), ConfigError);
  EXPECT_THROW(config_from_json(parse_config_text("[train]\ncvar_alpha = 1.5\n")), ConfigError);
  EXPECT_THROW(config_from_json(parse_config_text("algo = \"dqn\"\n")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/file.toml"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = tiny_experiment();
  c.algo = Algo::kRsDsac;
  c.train.cvar_alpha = 0.9;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.train.phi(), c.train.phi());
  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "c.json") << config_to_json(c).dump();
  EXPECT_EQ(config_to_json(load_config((dir / "c.json").string())), config_to_json(c));
  fs::remove_all(dir);
}

TEST(Config, SampleFileLoads) {
  const ExperimentConfig c = load_config(VAOI_SOURCE_DIR "/samples/small.toml");
  EXPECT_EQ(c.env.n_users, 3);
  EXPECT_EQ(c.eval.alphas.size(), 4u);
}

TEST(Config, AlphaSetsComplementaryLevel) {
  const ExperimentConfig c = config_from_json(parse_config_text("algo = \"rs_d3sac\"\n[train]\ncvar_alpha = 0.9\n"));
  EXPECT_NEAR(c.train.phi(), 0.1, 1e-15);
}

TEST(Heuristics, Examples) {
  Rng rng(1);
  BudgetState b;
  EXPECT_EQ(heuristic_action(HeuristicKind::kGreedyMaxVaoi, {0, 3, 3}, b, rng), 2);
  EXPECT_EQ(heuristic_action(HeuristicKind::kGreedyMaxVaoi, {0, 0, 0}, b, rng), 0);
  for (const std::vector<int>& v : {std::vector<int>{0, 3}, std::vector<int>{9, 9, 9}})
    EXPECT_EQ(heuristic_action(HeuristicKind::kAlwaysIdle, v, b, rng), 0);
  EXPECT_EQ(heuristic_action(HeuristicKind::kAlwaysTransmit, {1, 5, 2}, b, rng), 2);
  b.running_cost = 0.9;
  EXPECT_EQ(heuristic_action(HeuristicKind::kGreedyMaxVaoi, {0, 3, 3}, b, rng), 0);
  EXPECT_THROW(heuristic_action(HeuristicKind::kAlwaysIdle, {}, b, rng), ArgumentError);
}

TEST(Heuristics, RandomBudgetTransmitsAtTheBudgetRate) {
  Rng rng(4);
  BudgetState b;
  b.eta_max = 0.6;
  int sent = 0;
  std::vector<int> per_user(4, 0);
  for (int i = 0; i < 100'000; ++i) {
    const int a = heuristic_action(HeuristicKind::kRandomBudget, {1, 1, 1, 1}, b, rng);
    if (a != 0) {
      ++sent;
      ++per_user[static_cast<std::size_t>(a - 1)];
    }
  }
  EXPECT_NEAR(sent / 100'000.0, 0.6, 0.01);
  for (int c : per_user) EXPECT_NEAR(c / static_cast<double>(sent), 0.25, 0.01);
}

TEST(Heuristics, NamesRoundTrip) {
  for (auto k : {HeuristicKind::kGreedyMaxVaoi, HeuristicKind::kRandomBudget, HeuristicKind::kAlwaysIdle,
                 HeuristicKind::kAlwaysTransmit})
    EXPECT_EQ(parse_heuristic(to_string(k)), k);
  EXPECT_THROW(parse_heuristic("round_robin"), ArgumentError);
}

TEST(Evaluate, ZeroSlotsRejected) {
  EvalConfig e;
  e.slots = 0;
  EXPECT_THROW(evaluate_scheduler(EnvConfig::uniform(2, 0.5, 0.9), heuristic_scheduler(HeuristicKind::kAlwaysIdle), e, 1),
               ArgumentError);
}

TEST(Evaluate, EtaSeriesEndsAtAverageCost) {
  EvalConfig e;
  e.slots = 500;
  e.episodes = 2;
  const EvalResult r =
      evaluate_scheduler(EnvConfig::uniform(3, 0.5, 0.9), heuristic_scheduler(HeuristicKind::kGreedyMaxVaoi), e, 5);
  for (const auto& ep : r.episodes) {
    EXPECT_EQ(ep.eta.size(), 500u);
    EXPECT_NEAR(ep.eta.back(), average_cost(ep.trace.actions), 1e-12);
    const auto expected = running_cost_series(ep.trace.actions);
    for (std::size_t t = 0; t < expected.size(); ++t) EXPECT_NEAR(ep.eta[t], expected[t], 1e-12) << t;
  }
  EXPECT_EQ(r.episodes[0].seed, eval_seed(5, 0));
  EXPECT_EQ(r.episodes[1].seed, 5u + 1'000'000u + 1u);
  EXPECT_EQ(r.constraint_satisfied, r.avg_cost <= 0.85);
}

TEST(Evaluate, DeterministicChainMatchesOracleExactly) {
  const SmallInstance inst = SmallInstance::make(1, 5, 1.0, 1.0);
  EvalConfig e;
  e.slots = 1000;
  const EvalResult r = evaluate_scheduler(inst.env, heuristic_scheduler(HeuristicKind::kAlwaysTransmit), e, 3);
  EXPECT_NEAR(r.avg_vaoi, stationary_average_vaoi(inst, constant_policy(inst, 1)), 1e-12);
  EXPECT_EQ(r.avg_vaoi, 1.0);
  EXPECT_EQ(r.cvar.at(0.75), 1.0);
  EXPECT_EQ(r.avg_cost, 1.0);
}

TEST(Evaluate, WritesOutputs) {
  const fs::path dir = scratch("eval");
  EvalConfig e;
  e.slots = 50;
  e.alphas = {0.5, 0.9};
  const EvalResult r = evaluate_scheduler(EnvConfig::uniform(2, 0.5, 0.9), heuristic_scheduler(HeuristicKind::kRandomBudget), e, 1);
  write_eval_outputs(r, dir);
  const Json j = Json::parse(slurp(dir / "eval.json"));
  EXPECT_EQ(j.at("slots"), 50);
  EXPECT_TRUE(j.at("cvar").contains("0.5"));
  EXPECT_TRUE(j.at("cvar").contains("0.9"));
  EXPECT_EQ(j.at("seed"), 1'000'001u);
  std::ifstream samples(dir / "samples.csv");
  std::string line;
  std::getline(samples, line);
  EXPECT_EQ(line, "episode,t,user,vaoi");
  int rows = 0;
  while (std::getline(samples, line)) ++rows;
  EXPECT_EQ(rows, 100);
  fs::remove_all(dir);
}

TEST(Checkpoint, ExactRoundTrip) {
  for (Algo a : {Algo::kSac, Algo::kD2sac, Algo::kRsDsac, Algo::kRsD3sac}) {
    ExperimentConfig c = tiny_experiment();
    auto agent = make_agent(a, c.env, c.train, 9);
    agent->train_iteration();
    const fs::path dir = scratch("ckpt");
    save_checkpoint((dir / "c.json").string(), *agent, 1, 9);
    const LoadedCheckpoint back = load_checkpoint((dir / "c.json").string());
    EXPECT_EQ(back.agent->algo(), a);
    EXPECT_EQ(back.iteration, 1);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_EQ(flatten(back.agent->all_params()), flatten(agent->all_params()));
    EXPECT_EQ(back.agent->lagrange().lambda, agent->lagrange().lambda);
    EXPECT_EQ(back.agent->lagrange().eta, agent->lagrange().eta);
    Rng r1(3), r2(3);
    EXPECT_EQ(back.agent->action_probs({1, 4}, r1), agent->action_probs({1, 4}, r2));
    fs::remove_all(dir);
  }
}

TEST(Checkpoint, ShapeMismatchIsDescriptive) {
  ExperimentConfig c = tiny_experiment();
  auto agent = make_agent(Algo::kSac, c.env, c.train, 1);
  Json j = checkpoint_to_json(*agent, 0, 1);
  j["train"]["hidden"] = std::vector<int>{9};
  try {
    checkpoint_from_json(j);
    FAIL() << "expected a shape error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos);
  }
  Json k = checkpoint_to_json(*agent, 0, 1);
  k["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(k), ConfigError);
  EXPECT_THROW(check_env_compatible(c.env, EnvConfig::uniform(3, 0.6, 0.9, 10)), ConfigError);
  EXPECT_THROW(check_env_compatible(c.env, EnvConfig::uniform(2, 0.6, 0.9, 20)), ConfigError);
  EXPECT_NO_THROW(check_env_compatible(c.env, EnvConfig::uniform(2, 0.3, 0.5, 10)));
}

TEST(TrainRun, WritesSelfDescribingDirectory) {
  const fs::path dir = scratch("run");
  const RunResult r = train_run(tiny_experiment(), dir / "a");
  for (const char* f : {"manifest.json", "config.json", "metrics.csv", "timing.csv", "ckpt_final.json",
                        "ckpt_iter_00002.json"})
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  const Json m = Json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(m.at("status"), "complete");
  EXPECT_FALSE(m.at("end_time").is_null());
  EXPECT_EQ(m.at("revision"), VAOI_REVISION);
  EXPECT_EQ(config_to_json(config_from_json(m.at("config"))), config_to_json(tiny_experiment()));
  EXPECT_EQ(r.metrics.size(), 3u);
  std::ifstream metrics(dir / "a" / "metrics.csv");
  std::string header;
  std::getline(metrics, header);
  EXPECT_EQ(header, metrics_header());
  fs::remove_all(dir);
}

TEST(TrainRun, IdenticalArgumentsGiveIdenticalMetrics) {
  const fs::path dir = scratch("det");
  train_run(tiny_experiment(), dir / "a");
  train_run(tiny_experiment(), dir / "b");
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(TrainRun, FailureLeavesMarker) {
  const fs::path dir = scratch("fail");
  EXPECT_THROW(train_run(tiny_experiment(), dir,
                         [](const IterationMetrics& m) {
                           if (m.iteration == 2) throw StateError("interrupted");
                         }),
               StateError);
  const Json m = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m.at("status"), "failed");
  EXPECT_EQ(m.at("error"), "interrupted");
  EXPECT_FALSE(fs::exists(dir / "ckpt_final.json"));
  fs::remove_all(dir);
}

TEST(Sweep, CartesianRowsAggregationAndPlots) {
  const fs::path root = scratch("sweep");
  ExperimentConfig base = tiny_experiment();
  base.train.iterations = 1;
  base.train.transitions_per_iteration = 20;
  base.eval.slots = 50;
  SweepSpec spec;
  spec.param = SweepParam::kEtaMax;
  spec.values = {0.5, 0.65, 0.85};
  spec.algos = {Algo::kSac, Algo::kD2sac, Algo::kRsD3sac};
  int started = 0;
  const auto rows = run_sweep(base, spec, root, [&](double, Algo, std::uint64_t) { ++started; });
  EXPECT_EQ(started, 27);
  ASSERT_EQ(rows.size(), 27u);
  const auto csv = read_sweep_csv(root / "sweep.csv");
  ASSERT_EQ(csv.size(), 27u);
  for (const auto& m : {"avg_vaoi.png", "cvar.png", "avg_cost.png"}) EXPECT_TRUE(fs::exists(root / "plots" / m));

  const auto agg = aggregate_rows(csv, "avg_vaoi");
  double hand = 0.0;
  int n = 0;
  for (const auto& r : csv)
    if (r.algo == Algo::kD2sac && r.param_value == 0.65) {
      hand += r.avg_vaoi;
      ++n;
    }
  EXPECT_EQ(n, 3);
  EXPECT_NEAR(agg.at({"d2sac", 0.65}).mean, hand / 3.0, 1e-12);

  const std::string before = slurp(root / "sweep.csv");
  const std::string summary = slurp(root / "summary.csv");
  run_sweep(base, spec, root);
  EXPECT_EQ(slurp(root / "sweep.csv"), before);
  EXPECT_EQ(slurp(root / "summary.csv"), summary);
  fs::remove_all(root);
}

TEST(Sweep, AlphaValuesSetTrainingLevel) {
  const ExperimentConfig c = apply_sweep_value(ExperimentConfig::desk(), SweepParam::kAlpha, 0.9);
  EXPECT_NEAR(c.train.phi(), 0.1, 1e-15);
  const ExperimentConfig n = apply_sweep_value(ExperimentConfig::desk(), SweepParam::kNUsers, 3);
  EXPECT_EQ(n.env.arrival_rates.size(), 3u);
  EXPECT_THROW(apply_sweep_value(ExperimentConfig::desk(), SweepParam::kNUsers, 2.5), ArgumentError);
}

TEST(Sweep, UnknownParameterRejected) {
  EXPECT_THROW(parse_sweep_param("learning_rate"), ArgumentError);
  EXPECT_EQ(parse_sweep_param("success_prob"), SweepParam::kSuccessProb);
  SweepSpec empty;
  EXPECT_THROW(run_sweep(ExperimentConfig::desk(), empty, scratch("empty")), ArgumentError);
}

TEST(Plot, WritesPng) {
  const fs::path dir = scratch("plot");
  PlotSpec spec;
  spec.title = "demo";
  spec.series.push_back({"a", {0, 1, 2}, {1, 3, 2}, {0.5, 2.5, 1.5}, {1.5, 3.5, 2.5}});
  spec.series.push_back({"b", {0, 1, 2}, {2, 2, 2}, {}, {}});
  write_line_plot(spec, dir / "p.png");
  std::ifstream in(dir / "p.png", std::ios::binary);
  char sig[8];
  in.read(sig, 8);
  EXPECT_EQ(std::string(sig, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(nice_ticks(0.0, 1.0).front(), 0.0);
  fs::remove_all(dir);
}
