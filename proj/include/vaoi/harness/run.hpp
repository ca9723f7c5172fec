#pragma once

// One training run on disk:
//
//   <out>/manifest.json       algo, config snapshot, seed, revision, timestamps, status
//   <out>/config.json         the config alone (loadable with load_config)
//   <out>/metrics.csv         iteration,mean_reward,lambda,eta,critic_loss,actor_loss,updates
//   <out>/timing.csv          iteration,wall_seconds
//   <out>/ckpt_iter_<i>.json  every checkpoint_every iterations
//   <out>/ckpt_final.json
//
// metrics.csv depends only on the config, so identical runs write identical
// files; wall-clock time goes to timing.csv.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>

#include "vaoi/agents.hpp"
#include "vaoi/harness/checkpoint.hpp"
#include "vaoi/harness/config.hpp"

#ifndef VAOI_REVISION
#define VAOI_REVISION "unknown"
#endif

namespace vaoi {

inline constexpr const char* kOutputRootEnv = "VAOI_OUTPUT_ROOT";

/// $VAOI_OUTPUT_ROOT, or "runs" when unset.
inline std::filesystem::path default_output_root() {
  const char* root = std::getenv(kOutputRootEnv);
  return root && *root ? std::filesystem::path(root) : std::filesystem::path("runs");
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline std::string metrics_header() { return "iteration,mean_reward,lambda,eta,critic_loss,actor_loss,updates"; }

inline std::string metrics_row(const IterationMetrics& m) {
  std::ostringstream ss;
  ss.precision(17);
  ss << m.iteration << ',' << m.mean_reward << ',' << m.lambda << ',' << m.eta << ',' << m.critic_loss << ','
     << m.actor_loss << ',' << m.updates;
  return ss.str();
}

struct RunResult {
  std::filesystem::path dir;
  std::unique_ptr<Agent> agent;
  std::vector<IterationMetrics> metrics;
};

using ProgressFn = std::function<void(const IterationMetrics&)>;

/// Trains cfg.algo with cfg.seed into `dir`. The manifest is written before
/// the first iteration with status "running"; it ends as "complete", or as
/// "failed" with the error message if training throws.
inline RunResult train_run(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                           const ProgressFn& progress = {}) {
  cfg.validate();
  std::filesystem::create_directories(dir);
  Json manifest = {{"algo", to_string(cfg.algo)},
                   {"seed", cfg.seed},
                   {"revision", VAOI_REVISION},
                   {"config", config_to_json(cfg)},
                   {"start_time", utc_timestamp()},
                   {"end_time", nullptr},
                   {"status", "running"},
                   {"outputs",
                    {{"metrics", "metrics.csv"},
                     {"timing", "timing.csv"},
                     {"config", "config.json"},
                     {"final_checkpoint", "ckpt_final.json"}}}};
  write_json(dir / "manifest.json", manifest);
  write_json(dir / "config.json", config_to_json(cfg));

  RunResult result;
  result.dir = dir;
  try {
    result.agent = make_agent(cfg.algo, cfg.env, cfg.train, cfg.seed);
    std::ofstream metrics(dir / "metrics.csv");
    std::ofstream timing(dir / "timing.csv");
    metrics << metrics_header() << '\n';
    timing << "iteration,wall_seconds\n";
    Json checkpoints = Json::array();
    for (int i = 0; i < cfg.train.iterations; ++i) {
      const IterationMetrics m = result.agent->train_iteration();
      if (result.agent->lagrange().lambda < 0.0) throw StateError("negative Lagrange multiplier");
      result.metrics.push_back(m);
      metrics << metrics_row(m) << '\n' << std::flush;
      timing << m.iteration << ',' << m.wall_seconds << '\n';
      if (progress) progress(m);
      if (cfg.checkpoint_every > 0 && m.iteration % cfg.checkpoint_every == 0 && m.iteration < cfg.train.iterations) {
        std::ostringstream name;
        name << "ckpt_iter_" << std::setw(5) << std::setfill('0') << m.iteration << ".json";
        save_checkpoint((dir / name.str()).string(), *result.agent, m.iteration, cfg.seed);
        checkpoints.push_back(name.str());
      }
    }
    save_checkpoint((dir / "ckpt_final.json").string(), *result.agent, cfg.train.iterations, cfg.seed);
    manifest["outputs"]["periodic_checkpoints"] = checkpoints;
    manifest["status"] = "complete";
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    manifest["end_time"] = utc_timestamp();
    write_json(dir / "manifest.json", manifest);
    throw;
  }
  manifest["end_time"] = utc_timestamp();
  write_json(dir / "manifest.json", manifest);
  return result;
}

}  // namespace vaoi
