#pragma once

// Checkpoint container: one JSON document holding metadata, both configs, the
// Lagrange state and every named parameter array (column-major data).
//
// {
//   "format": "vaoi-checkpoint", "version": 1,
//   "algo": "d2sac", "iteration": 200, "seed": 1,
//   "metadata": {"n_users", "n_actions", "d_max", "feature_scale", "diffusion_steps",
//                "beta_min", "beta_max", "quantiles", "hidden"},
//   "env": {...}, "train": {...},
//   "lagrange": {"lambda", "eta", "steps"},
//   "params": {"actor.trunk.0.weight": {"rows", "cols", "data": [...]}, ...}
// }
//
// Doubles are written in shortest round-trip form, so a save/load cycle is exact.

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>

#include "vaoi/agents.hpp"
#include "vaoi/error.hpp"
#include "vaoi/harness/config.hpp"

namespace vaoi {

inline constexpr const char* kCheckpointFormat = "vaoi-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline Json checkpoint_to_json(Agent& agent, int iteration, std::uint64_t seed) {
  const EnvConfig& env = agent.env_config();
  const TrainConfig& train = agent.train_config();
  Json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["algo"] = to_string(agent.algo());
  j["iteration"] = iteration;
  j["seed"] = seed;
  j["metadata"] = {{"n_users", env.n_users},
                   {"n_actions", env.n_actions()},
                   {"d_max", env.d_max},
                   {"feature_scale", 1.0 / env.d_max},
                   {"diffusion_steps", train.diffusion_steps},
                   {"beta_min", train.beta_min},
                   {"beta_max", train.beta_max},
                   {"quantiles", train.quantiles},
                   {"hidden", train.hidden}};
  j["env"] = env_to_json(env);
  j["train"] = train_to_json(train);
  const LagrangeState& ls = agent.lagrange();
  j["lagrange"] = {{"lambda", ls.lambda}, {"eta", ls.eta}, {"steps", ls.steps}};
  Json params = Json::object();
  for (const auto& p : agent.all_params()) {
    const Mat& m = *p.value;
    params[p.name] = {{"rows", m.rows()},
                      {"cols", m.cols()},
                      {"data", std::vector<double>(m.data(), m.data() + m.size())}};
  }
  j["params"] = std::move(params);
  return j;
}

inline void save_checkpoint(const std::string& path, Agent& agent, int iteration, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw StateError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(agent, iteration, seed).dump();
  if (!out) throw StateError("failed writing checkpoint '" + path + "'");
}

struct LoadedCheckpoint {
  std::unique_ptr<Agent> agent;
  int iteration = 0;
  std::uint64_t seed = 0;
};

inline LoadedCheckpoint checkpoint_from_json(const Json& j) {
  if (j.value("format", std::string()) != kCheckpointFormat) throw ConfigError("not a checkpoint file");
  if (j.value("version", 0) != kCheckpointVersion) throw ConfigError("unsupported checkpoint version");
  LoadedCheckpoint out;
  const Algo algo = parse_algo(j.at("algo").get<std::string>());
  const EnvConfig env = env_from_json(j.at("env"));
  const TrainConfig train = train_from_json(j.at("train"));
  out.iteration = j.at("iteration").get<int>();
  out.seed = j.at("seed").get<std::uint64_t>();
  out.agent = make_agent(algo, env, train, out.seed);

  const Json& params = j.at("params");
  const ParamRefs refs = out.agent->all_params();
  if (params.size() != refs.size()) throw ConfigError("checkpoint parameter count does not match the architecture");
  for (const auto& p : refs) {
    if (!params.contains(p.name)) throw ConfigError("checkpoint is missing parameter '" + p.name + "'");
    const Json& e = params.at(p.name);
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    if (rows != p.value->rows() || cols != p.value->cols())
      throw ConfigError("parameter '" + p.name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(p.value->rows()) + "x" +
                        std::to_string(p.value->cols()));
    const auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw ConfigError("parameter '" + p.name + "' has the wrong element count");
    *p.value = Eigen::Map<const Mat>(data.data(), rows, cols);
  }
  LagrangeState ls;
  ls.lambda = j.at("lagrange").at("lambda").get<double>();
  ls.eta = j.at("lagrange").at("eta").get<double>();
  ls.steps = j.at("lagrange").at("steps").get<std::int64_t>();
  out.agent->set_lagrange(ls);
  return out;
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("invalid checkpoint '" + path + "': " + e.what());
  }
  try {
    return checkpoint_from_json(j);
  } catch (const Json::exception& e) {
    throw ConfigError("malformed checkpoint '" + path + "': " + e.what());
  }
}

/// Throws if the checkpoint was trained for a different environment shape.
inline void check_env_compatible(const EnvConfig& trained, const EnvConfig& requested) {
  if (trained.n_users != requested.n_users)
    throw ConfigError("checkpoint expects " + std::to_string(trained.n_users) + " users, environment has " +
                      std::to_string(requested.n_users));
  if (trained.d_max != requested.d_max)
    throw ConfigError("checkpoint expects d_max " + std::to_string(trained.d_max) + ", environment has " +
                      std::to_string(requested.d_max));
}

}  // namespace vaoi
