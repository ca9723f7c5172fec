#pragma once

// Experiment configuration: environment + training + evaluation settings,
// loaded from a sectioned key/value text file or from JSON.
//
//   algo = "rs_d3sac"
//   seed = 1
//   profile = "desk"      # base values: "desk" or "full"
//
//   [env]
//   n_users = 5
//   arrival_rate = 0.75   # or arrival_rates = [0.5, 0.75, ...]
//
//   [train]
//   iterations = 200
//
//   [eval]
//   alphas = [0.5, 0.75, 0.9, 0.95]

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vaoi/agents.hpp"
#include "vaoi/env.hpp"
#include "vaoi/error.hpp"

namespace vaoi {

using Json = nlohmann::json;

struct EvalConfig {
  int slots = 5000;
  std::vector<double> alphas{0.75};
  int episodes = 1;
  bool greedy = false;

  void validate() const {
    if (slots < 1) throw ConfigError("eval slots must be >= 1");
    if (episodes < 1) throw ConfigError("eval episodes must be >= 1");
    if (alphas.empty()) throw ConfigError("at least one CVaR alpha is required");
    for (double a : alphas)
      if (!(a > 0.0 && a < 1.0)) throw ConfigError("CVaR alphas must lie in (0, 1)");
  }
};

struct ExperimentConfig {
  std::string profile = "full";
  Algo algo = Algo::kD2sac;
  std::uint64_t seed = 1;
  int checkpoint_every = 50;
  EnvConfig env;
  TrainConfig train;
  EvalConfig eval;

  /// N = 20, r = 0.75, p = 0.9, eta_max = 0.85 with the reference hyperparameters.
  static ExperimentConfig full() { return {}; }

  /// Laptop-scale profile: N = 5, 200 iterations, narrower hidden layers and
  /// several gradient rounds per iteration.
  static ExperimentConfig desk() {
    ExperimentConfig c;
    c.profile = "desk";
    c.env = EnvConfig::uniform(5, 0.75, 0.9);
    c.train.iterations = 200;
    c.train.updates_per_iteration = 20;
    c.train.hidden = {64, 64};
    c.checkpoint_every = 50;
    return c;
  }

  static ExperimentConfig from_profile(const std::string& name) {
    if (name == "desk") return desk();
    if (name == "full") return full();
    throw ConfigError("unknown profile '" + name + "' (expected desk or full)");
  }

  void validate() const {
    env.validate();
    train.validate();
    eval.validate();
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Sectioned key/value text format

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline Json parse_scalar(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  auto fail = [&]() -> Json {
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
  };
  if (v.empty()) return fail();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return fail();
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v)
    if (c != '_') digits.push_back(c);
  try {
    std::size_t used = 0;
    if (digits.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(digits, &used);
      if (used == digits.size()) return i;
    } else {
      const double d = std::stod(digits, &used);
      if (used == digits.size()) return d;
    }
  } catch (const std::exception&) {
  }
  return fail();
}

inline Json parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
    Json arr = Json::array();
    const std::string body = trim(v.substr(1, v.size() - 2));
    if (body.empty()) return arr;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (trim(item).empty()) continue;
      arr.push_back(parse_scalar(item, line_no));
    }
    return arr;
  }
  return parse_scalar(v, line_no);
}

}  // namespace detail

/// Parses the sectioned text format into a JSON object (sections become nested objects).
inline Json parse_config_text(const std::string& text) {
  Json root = Json::object();
  Json* section = &root;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      const std::string name = detail::trim(s.substr(1, s.size() - 2));
      if (name.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      if (!root.contains(name)) root[name] = Json::object();
      section = &root[name];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (section->contains(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    (*section)[key] = detail::parse_value(s.substr(eq + 1), line_no);
  }
  return root;
}

// ---------------------------------------------------------------------------
// JSON <-> config

namespace detail {

template <class T>
T get_as(const Json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

inline void apply_env(const Json& j, EnvConfig& env) {
  if (!j.is_object()) throw ConfigError("[env] must be a section");
  std::optional<double> rate;
  std::optional<std::vector<double>> rates;
  for (const auto& [k, v] : j.items()) {
    if (k == "n_users") env.n_users = get_as<int>(v, k);
    else if (k == "arrival_rate") rate = get_as<double>(v, k);
    else if (k == "arrival_rates") rates = get_as<std::vector<double>>(v, k);
    else if (k == "success_prob") env.success_prob = get_as<double>(v, k);
    else if (k == "d_max") env.d_max = get_as<int>(v, k);
    else if (k == "eta_max") env.eta_max = get_as<double>(v, k);
    else if (k == "reward_post_transition") env.reward_post_transition = get_as<bool>(v, k);
    else throw ConfigError("unknown [env] key '" + k + "'");
  }
  if (rates && rate) throw ConfigError("give either arrival_rate or arrival_rates, not both");
  if (rates) {
    env.arrival_rates = *rates;
  } else {
    const double r = rate ? *rate : (env.arrival_rates.empty() ? 0.75 : env.arrival_rates.front());
    env.arrival_rates.assign(static_cast<std::size_t>(std::max(env.n_users, 0)), r);
  }
}

inline void apply_train(const Json& j, TrainConfig& t) {
  if (!j.is_object()) throw ConfigError("[train] must be a section");
  for (const auto& [k, v] : j.items()) {
    if (k == "iterations") t.iterations = get_as<int>(v, k);
    else if (k == "transitions_per_iteration") t.transitions_per_iteration = get_as<int>(v, k);
    else if (k == "batch_size") t.batch_size = get_as<int>(v, k);
    else if (k == "buffer_capacity") t.buffer_capacity = get_as<std::size_t>(v, k);
    else if (k == "actor_lr") t.actor_lr = get_as<double>(v, k);
    else if (k == "critic_lr") t.critic_lr = get_as<double>(v, k);
    else if (k == "temperature") t.temperature = get_as<double>(v, k);
    else if (k == "soft_update") t.soft_update = get_as<double>(v, k);
    else if (k == "discount") t.discount = get_as<double>(v, k);
    else if (k == "diffusion_steps") t.diffusion_steps = get_as<int>(v, k);
    else if (k == "beta_min") t.beta_min = get_as<double>(v, k);
    else if (k == "beta_max") t.beta_max = get_as<double>(v, k);
    else if (k == "huber_kappa") t.huber_kappa = get_as<double>(v, k);
    else if (k == "dual_step") t.dual_step = get_as<double>(v, k);
    else if (k == "quantiles") t.quantiles = get_as<int>(v, k);
    else if (k == "cvar_alpha") t.cvar_alpha = get_as<double>(v, k);
    else if (k == "updates_per_iteration") t.updates_per_iteration = get_as<int>(v, k);
    else if (k == "grad_clip") t.grad_clip = get_as<double>(v, k);
    else if (k == "reshape_at_sample") t.reshape_at_sample = get_as<bool>(v, k);
    else if (k == "hidden") t.hidden = get_as<std::vector<int>>(v, k);
    else throw ConfigError("unknown [train] key '" + k + "'");
  }
}

inline void apply_eval(const Json& j, EvalConfig& e) {
  if (!j.is_object()) throw ConfigError("[eval] must be a section");
  for (const auto& [k, v] : j.items()) {
    if (k == "slots") e.slots = get_as<int>(v, k);
    else if (k == "alphas") e.alphas = get_as<std::vector<double>>(v, k);
    else if (k == "episodes") e.episodes = get_as<int>(v, k);
    else if (k == "greedy") e.greedy = get_as<bool>(v, k);
    else throw ConfigError("unknown [eval] key '" + k + "'");
  }
}

}  // namespace detail

/// Builds a config from a parsed document: the profile supplies the base
/// values and every other key overrides them.
inline ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig c = ExperimentConfig::from_profile(j.value("profile", std::string("full")));
  for (const auto& [k, v] : j.items()) {
    if (k == "profile") continue;
    if (k == "algo") c.algo = parse_algo(detail::get_as<std::string>(v, k));
    else if (k == "seed") c.seed = detail::get_as<std::uint64_t>(v, k);
    else if (k == "checkpoint_every") c.checkpoint_every = detail::get_as<int>(v, k);
    else if (k == "env") detail::apply_env(v, c.env);
    else if (k == "train") detail::apply_train(v, c.train);
    else if (k == "eval") detail::apply_eval(v, c.eval);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  c.validate();
  return c;
}

inline Json env_to_json(const EnvConfig& e) {
  return {{"n_users", e.n_users},     {"arrival_rates", e.arrival_rates},
          {"success_prob", e.success_prob}, {"d_max", e.d_max},
          {"eta_max", e.eta_max},     {"reward_post_transition", e.reward_post_transition}};
}

inline Json train_to_json(const TrainConfig& t) {
  return {{"iterations", t.iterations},
          {"transitions_per_iteration", t.transitions_per_iteration},
          {"batch_size", t.batch_size},
          {"buffer_capacity", t.buffer_capacity},
          {"actor_lr", t.actor_lr},
          {"critic_lr", t.critic_lr},
          {"temperature", t.temperature},
          {"soft_update", t.soft_update},
          {"discount", t.discount},
          {"diffusion_steps", t.diffusion_steps},
          {"beta_min", t.beta_min},
          {"beta_max", t.beta_max},
          {"huber_kappa", t.huber_kappa},
          {"dual_step", t.dual_step},
          {"quantiles", t.quantiles},
          {"cvar_alpha", t.cvar_alpha},
          {"updates_per_iteration", t.updates_per_iteration},
          {"grad_clip", t.grad_clip},
          {"reshape_at_sample", t.reshape_at_sample},
          {"hidden", t.hidden}};
}

inline Json eval_to_json(const EvalConfig& e) {
  return {{"slots", e.slots}, {"alphas", e.alphas}, {"episodes", e.episodes}, {"greedy", e.greedy}};
}

/// Full snapshot; feeding it back through config_from_json reproduces the config.
inline Json config_to_json(const ExperimentConfig& c) {
  return {{"profile", c.profile},
          {"algo", to_string(c.algo)},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"env", env_to_json(c.env)},
          {"train", train_to_json(c.train)},
          {"eval", eval_to_json(c.eval)}};
}

inline EnvConfig env_from_json(const Json& j) {
  EnvConfig e;
  detail::apply_env(j, e);
  e.validate();
  return e;
}

inline TrainConfig train_from_json(const Json& j) {
  TrainConfig t;
  detail::apply_train(j, t);
  t.validate();
  return t;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads a .json file as JSON and anything else as the sectioned text format.
inline ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      j = Json::parse(text);
    } catch (const Json::exception& e) {
      throw ConfigError("invalid JSON in '" + path + "': " + e.what());
    }
  } else {
    j = parse_config_text(text);
  }
  return config_from_json(j);
}

}  // namespace vaoi
