#pragma once

// Parameter sweeps: one train + evaluate run per (value, algo, seed), laid
// out as <root>/<param>_<value>/<algo>/seed_<seed>/. A run whose eval.json
// already exists is reused, so re-running a sweep only fills in what is
// missing and rebuilds the aggregates.
//
//   sweep.csv    param_value,algo,seed,avg_vaoi,cvar,avg_cost
//   summary.csv  param_value,algo,metric,mean,min,max
//   plots/<metric>.png

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vaoi/error.hpp"
#include "vaoi/harness/checkpoint.hpp"
#include "vaoi/harness/config.hpp"
#include "vaoi/harness/evaluate.hpp"
#include "vaoi/harness/plot.hpp"
#include "vaoi/harness/run.hpp"

namespace vaoi {

enum class SweepParam { kEtaMax, kArrivalRate, kSuccessProb, kNUsers, kAlpha };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "eta_max") return SweepParam::kEtaMax;
  if (s == "arrival_rate") return SweepParam::kArrivalRate;
  if (s == "success_prob") return SweepParam::kSuccessProb;
  if (s == "n_users") return SweepParam::kNUsers;
  if (s == "alpha") return SweepParam::kAlpha;
  throw ArgumentError("unknown sweep parameter '" + s +
                      "' (expected eta_max, arrival_rate, success_prob, n_users or alpha)");
}

inline std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::kEtaMax: return "eta_max";
    case SweepParam::kArrivalRate: return "arrival_rate";
    case SweepParam::kSuccessProb: return "success_prob";
    case SweepParam::kNUsers: return "n_users";
    case SweepParam::kAlpha: return "alpha";
  }
  return "?";
}

struct SweepSpec {
  SweepParam param = SweepParam::kEtaMax;
  std::vector<double> values;
  std::vector<Algo> algos{Algo::kSac, Algo::kD2sac, Algo::kRsDsac, Algo::kRsD3sac};
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct SweepRow {
  double param_value = 0.0;
  Algo algo = Algo::kSac;
  std::uint64_t seed = 0;
  double avg_vaoi = 0.0;
  double cvar = 0.0;
  double avg_cost = 0.0;
};

/// The base config with one parameter replaced. For alpha, both the training
/// risk level and the reported CVaR level change.
inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, SweepParam p, double v) {
  switch (p) {
    case SweepParam::kEtaMax: cfg.env.eta_max = v; break;
    case SweepParam::kArrivalRate: std::fill(cfg.env.arrival_rates.begin(), cfg.env.arrival_rates.end(), v); break;
    case SweepParam::kSuccessProb: cfg.env.success_prob = v; break;
    case SweepParam::kNUsers: {
      if (v < 1.0 || v != std::floor(v)) throw ArgumentError("n_users values must be positive integers");
      const double rate = cfg.env.arrival_rates.empty() ? 0.75 : cfg.env.arrival_rates.front();
      cfg.env.n_users = static_cast<int>(v);
      cfg.env.arrival_rates.assign(static_cast<std::size_t>(cfg.env.n_users), rate);
      break;
    }
    case SweepParam::kAlpha: cfg.train.cvar_alpha = v; break;
  }
  cfg.validate();
  return cfg;
}

/// CVaR level reported in the aggregate for a run.
inline double sweep_cvar_alpha(const ExperimentConfig& cfg, SweepParam p, double v) {
  return p == SweepParam::kAlpha ? v : cfg.eval.alphas.front();
}

inline std::string value_tag(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

inline std::filesystem::path sweep_run_dir(const std::filesystem::path& root, SweepParam p, double v, Algo a,
                                           std::uint64_t seed) {
  return root / (to_string(p) + "_" + value_tag(v)) / to_string(a) / ("seed_" + std::to_string(seed));
}

/// Trains and evaluates one configuration unless its eval.json already exists.
inline Json train_and_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                               const ProgressFn& progress = {}) {
  const auto eval_path = dir / "eval.json";
  if (std::filesystem::exists(eval_path)) return Json::parse(read_text_file(eval_path.string()));
  const RunResult run = train_run(cfg, dir, progress);
  const EvalResult r = evaluate_scheduler(cfg.env, agent_scheduler(*run.agent, cfg.eval.greedy), cfg.eval, cfg.seed);
  write_eval_outputs(r, dir);
  return eval_to_json(r);
}

inline std::vector<SweepRow> collect_sweep_rows(const ExperimentConfig& base, const SweepSpec& spec,
                                                const std::filesystem::path& root) {
  std::vector<SweepRow> rows;
  for (double v : spec.values)
    for (Algo a : spec.algos)
      for (std::uint64_t s : spec.seeds) {
        const auto path = sweep_run_dir(root, spec.param, v, a, s) / "eval.json";
        if (!std::filesystem::exists(path)) continue;
        const Json j = Json::parse(read_text_file(path.string()));
        const ExperimentConfig cfg = apply_sweep_value(base, spec.param, v);
        const std::string key = format_alpha(sweep_cvar_alpha(cfg, spec.param, v));
        if (!j.at("cvar").contains(key)) throw StateError("eval.json at " + path.string() + " lacks CVaR level " + key);
        rows.push_back({v, a, s, j.at("avg_vaoi").get<double>(), j.at("cvar").at(key).get<double>(),
                        j.at("avg_cost").get<double>()});
      }
  return rows;
}

inline std::string sweep_csv_header() { return "param_value,algo,seed,avg_vaoi,cvar,avg_cost"; }

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << sweep_csv_header() << '\n';
  for (const auto& r : rows)
    out << r.param_value << ',' << to_string(r.algo) << ',' << r.seed << ',' << r.avg_vaoi << ',' << r.cvar << ','
        << r.avg_cost << '\n';
}

inline std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != sweep_csv_header()) throw ArgumentError("'" + path.string() + "' is not a sweep CSV");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& x : f) std::getline(ss, x, ',');
    rows.push_back({std::stod(f[0]), parse_algo(f[1]), std::stoull(f[2]), std::stod(f[3]), std::stod(f[4]),
                    std::stod(f[5])});
  }
  return rows;
}

struct Aggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

inline double metric_of(const SweepRow& r, const std::string& metric) {
  if (metric == "avg_vaoi") return r.avg_vaoi;
  if (metric == "cvar") return r.cvar;
  if (metric == "avg_cost") return r.avg_cost;
  throw ArgumentError("unknown metric '" + metric + "'");
}

/// Mean, min and max over seeds, keyed by (algo, param value).
inline std::map<std::pair<std::string, double>, Aggregate> aggregate_rows(const std::vector<SweepRow>& rows,
                                                                         const std::string& metric) {
  std::map<std::pair<std::string, double>, Aggregate> out;
  for (const auto& r : rows) {
    auto& a = out[{to_string(r.algo), r.param_value}];
    const double x = metric_of(r, metric);
    if (a.count == 0) {
      a.min = a.max = x;
    } else {
      a.min = std::min(a.min, x);
      a.max = std::max(a.max, x);
    }
    a.mean += (x - a.mean) / ++a.count;
  }
  return out;
}

inline const std::vector<std::string>& sweep_metrics() {
  static const std::vector<std::string> m{"avg_vaoi", "cvar", "avg_cost"};
  return m;
}

inline void write_summary_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "param_value,algo,metric,mean,min,max\n";
  for (const auto& metric : sweep_metrics())
    for (const auto& [key, a] : aggregate_rows(rows, metric))
      out << key.second << ',' << key.first << ',' << metric << ',' << a.mean << ',' << a.min << ',' << a.max << '\n';
}

/// One PNG per metric with mean lines and min/max bands across seeds.
inline std::vector<std::filesystem::path> write_sweep_plots(const std::vector<SweepRow>& rows,
                                                            const std::string& param_name,
                                                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  for (const auto& metric : sweep_metrics()) {
    PlotSpec spec;
    spec.title = metric + " vs " + param_name;
    spec.x_label = param_name;
    spec.y_label = metric;
    std::map<std::string, PlotSeries> by_algo;
    for (const auto& [key, a] : aggregate_rows(rows, metric)) {
      auto& s = by_algo[key.first];
      s.label = key.first;
      s.x.push_back(key.second);
      s.y.push_back(a.mean);
      s.lo.push_back(a.min);
      s.hi.push_back(a.max);
    }
    for (auto& [name, s] : by_algo) spec.series.push_back(std::move(s));
    const auto file = dir / (metric + ".png");
    write_line_plot(spec, file);
    files.push_back(file);
  }
  return files;
}

using SweepProgressFn = std::function<void(double value, Algo algo, std::uint64_t seed)>;

/// Runs every missing (value, algo, seed) combination sequentially, then
/// rewrites sweep.csv, summary.csv and the plots from the run directories.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base, const SweepSpec& spec,
                                       const std::filesystem::path& root, const SweepProgressFn& on_start = {}) {
  if (spec.values.empty()) throw ArgumentError("sweep needs at least one value");
  if (spec.algos.empty() || spec.seeds.empty()) throw ArgumentError("sweep needs at least one algo and seed");
  for (double v : spec.values) apply_sweep_value(base, spec.param, v);
  std::filesystem::create_directories(root);
  for (double v : spec.values)
    for (Algo a : spec.algos)
      for (std::uint64_t s : spec.seeds) {
        ExperimentConfig cfg = apply_sweep_value(base, spec.param, v);
        cfg.algo = a;
        cfg.seed = s;
        const double alpha = sweep_cvar_alpha(cfg, spec.param, v);
        if (std::find(cfg.eval.alphas.begin(), cfg.eval.alphas.end(), alpha) == cfg.eval.alphas.end())
          cfg.eval.alphas.push_back(alpha);
        if (on_start) on_start(v, a, s);
        train_and_evaluate(cfg, sweep_run_dir(root, spec.param, v, a, s));
      }
  const auto rows = collect_sweep_rows(base, spec, root);
  write_sweep_csv(rows, root / "sweep.csv");
  write_summary_csv(rows, root / "summary.csv");
  write_sweep_plots(rows, to_string(spec.param), root / "plots");
  return rows;
}

}  // namespace vaoi
