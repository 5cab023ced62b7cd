#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uavaoi/baselines.hpp"
#include "uavaoi/config.hpp"
#include "uavaoi/decpomdp.hpp"
#include "uavaoi/qmix.hpp"

namespace uavaoi {

namespace fs = std::filesystem;

/// Bumped whenever training results for identical inputs would change, so
/// stale cached checkpoints are never reused.
inline constexpr int kTrainerVersion = 3;

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"qmix", "qmix-nomask", "idqn", "nearest", "cluster", "random"};
  return names;
}

inline bool is_learned(const std::string& algo) { return algo == "qmix" || algo == "qmix-nomask" || algo == "idqn"; }

/// Shortest decimal form that round-trips.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------
// Sweep axes

/// Axis names accepted by `apply_axis`.
inline const std::vector<std::string>& known_axes() {
  static const std::vector<std::string> axes{"none", "num_uavs", "num_sns", "xi_th_db", "uav_energy_max", "harvest_prob"};
  return axes;
}

/// Axes whose change leaves the learned model valid (same observation
/// normalization and action space), so sweeping them needs no retraining.
inline bool eval_only_axis(const std::string& axis) {
  return axis == "none" || axis == "xi_th_db" || axis == "harvest_prob";
}

/// `base` with one parameter replaced, derived fields recomputed.
inline WorldConfig apply_axis(const WorldConfig& base, const std::string& axis, double value) {
  WorldConfig cfg = base;
  if (axis == "none" || axis.empty()) return cfg;
  const bool default_penalty = base.collision_penalty == static_cast<double>(base.num_sns) * base.delta_max;
  if (axis == "num_uavs") {
    cfg.num_uavs = static_cast<int>(value);
    if (cfg.num_uavs != value || cfg.num_uavs < 1) fail(ErrorCode::kConfig, "num_uavs must be a positive integer");
    cfg.starts.clear();
    cfg.stops.clear();
  } else if (axis == "num_sns") {
    cfg.num_sns = static_cast<int>(value);
    if (cfg.num_sns != value || cfg.num_sns < 1) fail(ErrorCode::kConfig, "num_sns must be a positive integer");
    cfg.sn_positions.clear();
    const double lambda = base.harvest_prob.empty() ? base.harvest_prob_default : base.harvest_prob.front();
    cfg.harvest_prob.assign(cfg.num_sns, lambda);
    if (default_penalty) cfg.collision_penalty = -1.0;
  } else if (axis == "xi_th_db") {
    cfg.xi_th_db = value;
  } else if (axis == "uav_energy_max") {
    cfg.uav_energy_max = value;
  } else if (axis == "harvest_prob") {
    cfg.harvest_prob_default = value;
    cfg.harvest_prob.assign(cfg.num_sns, value);
  } else {
    fail(ErrorCode::kConfig, "unknown sweep axis '" + axis + "'");
  }
  cfg.finalize();
  return cfg;
}

// ---------------------------------------------------------------------------
// Curves

inline constexpr const char* kCurveSchema = "# schema uavaoi.curve v1";

inline void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& curve, const nlohmann::json& meta) {
  out << kCurveSchema << " " << meta.dump() << "\n";
  out << "episode,cumulative_cost,epsilon,loss,average_aoi,collisions\n";
  for (const auto& r : curve) {
    out << r.episode << ',' << fmt(r.cumulative_cost) << ',' << fmt(r.epsilon) << ',' << fmt(r.loss) << ','
        << fmt(r.average_aoi) << ',' << r.collisions << '\n';
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::vector<CurveRow> read_curve_csv(std::istream& in) {
  std::vector<CurveRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto c = split_csv(line);
    if (c.size() != 6) fail(ErrorCode::kIo, "bad curve row: " + line);
    CurveRow r;
    r.episode = std::stoi(c[0]);
    r.cumulative_cost = std::stod(c[1]);
    r.epsilon = std::stod(c[2]);
    r.loss = std::stod(c[3]);
    r.average_aoi = std::stod(c[4]);
    r.collisions = std::stoi(c[5]);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Training with a content-addressed checkpoint cache

inline LearnerParams params_for(const std::string& algo, LearnerParams p) {
  p.use_mask = algo != "qmix-nomask";
  return p;
}

inline Algorithm algorithm_for(const std::string& algo) {
  if (algo == "qmix" || algo == "qmix-nomask") return Algorithm::kQmix;
  if (algo == "idqn") return Algorithm::kIdqn;
  fail(ErrorCode::kConfig, "'" + algo + "' is not a learned algorithm");
}

/// Key of a training run: everything that determines its result.
inline std::string training_key(const WorldConfig& cfg, const std::string& algo, const LearnerParams& p,
                                std::uint64_t seed) {
  nlohmann::json j;
  j["config"] = to_json(cfg);
  j["algorithm"] = algo;
  j["learner"] = to_json(params_for(algo, p));
  j["seed"] = seed;
  j["trainer_version"] = kTrainerVersion;
  return hex64(Rng::hash(j.dump()));
}

struct TrainedModel {
  std::unique_ptr<Learner<float>> learner;
  std::vector<CurveRow> curve;
  std::string key;
  bool from_cache = false;
  double train_seconds = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains `algo` on `cfg`, or loads the result of an identical earlier run
/// from `cache_dir` (empty: no cache).
inline TrainedModel train_or_load(const WorldConfig& cfg, const std::string& algo, const LearnerParams& base_params,
                                  std::uint64_t seed, const fs::path& cache_dir, const ProgressFn& progress = {}) {
  TrainedModel out;
  const LearnerParams p = params_for(algo, base_params);
  out.key = training_key(cfg, algo, p, seed);
  out.learner = std::make_unique<Learner<float>>(cfg, p, algorithm_for(algo), seed);
  const fs::path ckpt = cache_dir.empty() ? fs::path() : cache_dir / (out.key + ".ckpt");
  const fs::path curve = cache_dir.empty() ? fs::path() : cache_dir / (out.key + ".curve.csv");
  if (!cache_dir.empty() && fs::exists(ckpt) && fs::exists(curve)) {
    out.learner->load(ckpt.string());
    std::ifstream in(curve);
    out.curve = read_curve_csv(in);
    if (static_cast<int>(out.curve.size()) == p.episodes) {
      out.from_cache = true;
      return out;
    }
    out.learner = std::make_unique<Learner<float>>(cfg, p, algorithm_for(algo), seed);
    out.curve.clear();
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::string tag = algo + " seed " + std::to_string(seed);
  out.curve = out.learner->train([&](const CurveRow& r) {
    if (progress && (r.episode % 250 == 0 || r.episode == p.episodes)) {
      progress(tag + ": episode " + std::to_string(r.episode) + "/" + std::to_string(p.episodes) +
               " cost " + fmt(r.cumulative_cost) + " eps " + fmt(r.epsilon));
    }
  });
  out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    nlohmann::json meta{{"key", out.key}, {"algorithm", algo}, {"seed", seed}, {"config_hash", hex64(config_hash(cfg))}};
    out.learner->save(ckpt.string(), meta);
    const fs::path tmp = curve.string() + ".tmp";
    {
      std::ofstream f(tmp);
      write_curve_csv(f, out.curve, meta);
    }
    fs::rename(tmp, curve);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  double total_average_aoi = 0.0;
  int collision_count = 0;
  double mean_residual_energy = 0.0;
  std::vector<EpisodeRecord> kept;  // first `keep` episodes
};

/// Environment streams for evaluation episode `e`; identical across
/// algorithms for paired comparisons.
inline Rng eval_env_rng(std::uint64_t seed, int e) {
  return Rng(seed, Rng::hash("eval")).split(static_cast<std::uint64_t>(e));
}

template <typename MakePolicy>
EvalResult evaluate(const WorldConfig& cfg, EnvOptions opt, MakePolicy&& make_policy, std::uint64_t seed,
                    int episodes, int keep = 0) {
  if (episodes < 1) fail(ErrorCode::kConfig, "need at least one evaluation episode");
  Environment env(cfg, opt);
  EvalResult r;
  double aoi = 0.0, residual = 0.0;
  for (int e = 0; e < episodes; ++e) {
    auto policy = make_policy();
    EpisodeRecord rec = run_episode(env, eval_env_rng(seed, e), policy, seed, static_cast<std::uint64_t>(e));
    aoi += episode_average_aoi(rec);
    r.collision_count += rec.collisions();
    double res = 0.0;
    for (const auto& u : rec.final_state.uavs) res += cfg.uav_energy_max - u.energy_spent;
    residual += res / cfg.num_uavs;
    if (e < keep) r.kept.push_back(std::move(rec));
  }
  r.total_average_aoi = aoi / episodes;
  r.mean_residual_energy = residual / episodes;
  return r;
}

// ---------------------------------------------------------------------------
// Campaigns

struct ExperimentSpec {
  WorldConfig base = desk_profile();
  std::string axis = "none";
  std::vector<double> values{0.0};
  std::vector<std::string> algorithms{"qmix", "idqn", "nearest", "cluster"};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  LearnerParams learner = [] {
    LearnerParams p;
    p.episodes = 3000;
    return p;
  }();
  int eval_episodes = 50;
  fs::path out_dir = "out";
  fs::path cache_dir;  // empty: <out_dir>/cache
  bool traces = true;

  fs::path cache() const { return cache_dir.empty() ? out_dir / "cache" : cache_dir; }
};

inline void validate(const ExperimentSpec& s) {
  if (std::find(known_axes().begin(), known_axes().end(), s.axis) == known_axes().end()) {
    fail(ErrorCode::kConfig, "unknown sweep axis '" + s.axis + "'");
  }
  if (s.values.empty() || s.seeds.empty() || s.algorithms.empty()) fail(ErrorCode::kConfig, "empty sweep, seed or algorithm list");
  for (const auto& a : s.algorithms) {
    if (std::find(known_algorithms().begin(), known_algorithms().end(), a) == known_algorithms().end()) {
      fail(ErrorCode::kConfig, "unknown algorithm '" + a + "'");
    }
  }
  if (s.eval_episodes < 1) fail(ErrorCode::kConfig, "eval episodes must be >= 1");
  for (double v : s.values) apply_axis(s.base, s.axis, v);  // throws on invalid points
}

inline WorldConfig profile(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "full") return default_config();
  fail(ErrorCode::kConfig, "unknown profile '" + name + "' (desk, full)");
}

/// Campaign description. Keys: profile, world (overlay), axis, values,
/// algorithms, seeds, learner, eval_episodes, out_dir, cache_dir, traces.
inline ExperimentSpec experiment_from_json(const nlohmann::json& j, ExperimentSpec s = {}) {
  try {
    if (j.contains("profile")) s.base = profile(j.at("profile").get<std::string>());
    if (j.contains("world")) s.base = config_from_json(j.at("world"), s.base);
    if (j.contains("axis")) s.axis = j.at("axis").get<std::string>();
    if (j.contains("values")) s.values = j.at("values").get<std::vector<double>>();
    if (j.contains("algorithms")) s.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("learner")) s.learner = learner_params_from_json(j.at("learner"), s.learner);
    if (j.contains("eval_episodes")) s.eval_episodes = j.at("eval_episodes").get<int>();
    if (j.contains("out_dir")) s.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("cache_dir")) s.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("traces")) s.traces = j.at("traces").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, e.what());
  }
  validate(s);
  return s;
}

struct MetricsRow {
  std::string algorithm;
  std::string axis = "none";
  double value = 0.0;
  std::uint64_t seed = 0;
  double total_average_aoi = 0.0;
  int collision_count = 0;
  double mean_residual_energy = 0.0;
  std::string config_hash;
  double wall_time = 0.0;  // kept out of the metrics CSV (not reproducible)
};

inline constexpr const char* kMetricsSchema = "# schema uavaoi.metrics v1";
inline constexpr const char* kMetricsHeader =
    "algorithm,axis,value,seed,total_average_aoi,collision_count,mean_residual_energy,config_hash";

inline std::string csv_line(const MetricsRow& r) {
  std::ostringstream os;
  os << r.algorithm << ',' << r.axis << ',' << fmt(r.value) << ',' << r.seed << ',' << fmt(r.total_average_aoi) << ','
     << r.collision_count << ',' << fmt(r.mean_residual_energy) << ',' << r.config_hash;
  return os.str();
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsSchema << "\n" << kMetricsHeader << "\n";
  for (const auto& r : rows) out << csv_line(r) << "\n";
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kMetricsHeader) fail(ErrorCode::kIo, "unexpected metrics header: " + line);
      header = true;
      continue;
    }
    const auto c = split_csv(line);
    if (c.size() != 8) fail(ErrorCode::kIo, "bad metrics row: " + line);
    MetricsRow r;
    r.algorithm = c[0];
    r.axis = c[1];
    r.value = std::stod(c[2]);
    r.seed = std::stoull(c[3]);
    r.total_average_aoi = std::stod(c[4]);
    r.collision_count = std::stoi(c[5]);
    r.mean_residual_energy = std::stod(c[6]);
    r.config_hash = c[7];
    rows.push_back(r);
  }
  return rows;
}

/// Everything needed to reproduce one campaign row.
struct CellSpec {
  WorldConfig train_config;  // the model is trained here
  WorldConfig eval_config;   // and evaluated here
  std::string algorithm;
  std::string axis = "none";
  double value = 0.0;
  std::uint64_t seed = 0;
  LearnerParams learner;
  int eval_episodes = 50;
};

inline nlohmann::json to_json(const CellSpec& c) {
  return {{"train_config", to_json(c.train_config)},
          {"eval_config", to_json(c.eval_config)},
          {"config_hash", hex64(config_hash(c.eval_config))},
          {"algorithm", c.algorithm},
          {"axis", c.axis},
          {"value", c.value},
          {"seed", c.seed},
          {"learner", to_json(c.learner)},
          {"eval_episodes", c.eval_episodes},
          {"trainer_version", kTrainerVersion}};
}

inline CellSpec cell_from_json(const nlohmann::json& j) {
  CellSpec c;
  try {
    c.train_config = config_from_json(j.at("train_config"));
    c.eval_config = config_from_json(j.at("eval_config"));
    c.algorithm = j.at("algorithm").get<std::string>();
    c.axis = j.at("axis").get<std::string>();
    c.value = j.at("value").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.learner = learner_params_from_json(j.at("learner"));
    c.eval_episodes = j.at("eval_episodes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("cell metadata: ") + e.what());
  }
  return c;
}

/// Cache of trained models shared by the cells of a campaign.
class ModelStore {
 public:
  ModelStore(fs::path cache, ProgressFn progress) : cache_(std::move(cache)), progress_(std::move(progress)) {}

  TrainedModel& get(const WorldConfig& cfg, const std::string& algo, const LearnerParams& p, std::uint64_t seed) {
    const std::string key = training_key(cfg, algo, p, seed);
    auto it = models_.find(key);
    if (it == models_.end()) it = models_.emplace(key, train_or_load(cfg, algo, p, seed, cache_, progress_)).first;
    return it->second;
  }

  void clear() { models_.clear(); }

 private:
  fs::path cache_;
  ProgressFn progress_;
  std::map<std::string, TrainedModel> models_;
};

struct CellResult {
  MetricsRow row;
  std::optional<EpisodeRecord> trace;
  const TrainedModel* model = nullptr;
};

inline CellResult run_cell(const CellSpec& c, ModelStore& store, bool keep_trace = false) {
  const auto t0 = std::chrono::steady_clock::now();
  CellResult out;
  EvalResult ev;
  const int keep = keep_trace ? 1 : 0;
  if (c.algorithm == "cluster") {
    const ClusterAssignment assignment = kmeans_cluster(c.eval_config);
    ev = evaluate(c.eval_config, {}, [&] { return ClusterPolicy(c.eval_config, assignment); }, c.seed, c.eval_episodes, keep);
  } else if (c.algorithm == "random") {
    int e = 0;
    ev = evaluate(c.eval_config, {}, [&] { return RandomPolicy{Rng(c.seed, Rng::hash("random-policy")).split(e++)}; },
                  c.seed, c.eval_episodes, keep);
  } else {
    // nearest scheduling borrows the trajectories of the trained QMIX model
    const std::string trained = c.algorithm == "nearest" ? "qmix" : c.algorithm;
    TrainedModel& model = store.get(c.train_config, trained, c.learner, c.seed);
    out.model = &model;
    Learner<float>& learner = *model.learner;
    EnvOptions opt;
    opt.mask_mode = learner.params().use_mask ? MaskMode::kEnforce : MaskMode::kProject;
    if (c.algorithm == "nearest") {
      ev = evaluate(c.eval_config, opt, [&] { return NearestPolicy<float>(learner); }, c.seed, c.eval_episodes, keep);
    } else {
      ev = evaluate(c.eval_config, opt, [&] { return typename Learner<float>::Actor(learner, Rng(), learner.params().use_mask); },
                    c.seed, c.eval_episodes, keep);
    }
  }
  out.row.algorithm = c.algorithm;
  out.row.axis = c.axis;
  out.row.value = c.value;
  out.row.seed = c.seed;
  out.row.total_average_aoi = ev.total_average_aoi;
  out.row.collision_count = ev.collision_count;
  out.row.mean_residual_energy = ev.mean_residual_energy;
  out.row.config_hash = hex64(config_hash(c.eval_config));
  out.row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.model && !out.model->from_cache) out.row.wall_time += out.model->train_seconds;
  if (!ev.kept.empty()) out.trace = std::move(ev.kept.front());
  return out;
}

struct CampaignResult {
  std::vector<MetricsRow> rows;
  std::vector<std::string> failures;
};

inline std::string cell_name(const CellSpec& c) {
  return c.algorithm + "_" + c.axis + "=" + fmt(c.value) + "_seed" + std::to_string(c.seed);
}

/// Runs every (sweep value, seed, algorithm) cell. Learned models for
/// evaluation-only axes are trained once on the base config. Failed cells
/// are reported and skipped.
inline CampaignResult run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {}) {
  validate(spec);
  CampaignResult result;
  ModelStore store(spec.cache(), progress);
  fs::create_directories(spec.out_dir / "cells");
  std::ofstream timing(spec.out_dir / "wall_time.csv");
  timing << "algorithm,axis,value,seed,wall_time_s\n";
  for (double value : spec.values) {
    const WorldConfig eval_cfg = apply_axis(spec.base, spec.axis, value);
    const WorldConfig train_cfg = eval_only_axis(spec.axis) ? spec.base : eval_cfg;
    for (std::uint64_t seed : spec.seeds) {
      for (const auto& algo : spec.algorithms) {
        CellSpec cell{train_cfg, eval_cfg, algo, spec.axis, value, seed, spec.learner, spec.eval_episodes};
        const std::string name = cell_name(cell);
        try {
          CellResult r = run_cell(cell, store, spec.traces);
          const fs::path dir = spec.out_dir / "cells" / name;
          fs::create_directories(dir);
          std::ofstream(dir / "meta.json") << to_json(cell).dump(2) << "\n";
          std::ofstream(dir / "metrics.csv") << kMetricsSchema << "\n" << kMetricsHeader << "\n" << csv_line(r.row) << "\n";
          if (r.trace) {
            std::ofstream tf(dir / "trace.csv");
            tf << "# config " << hex64(config_hash(eval_cfg)) << " seed " << seed << "\n";
            write_trace_csv(tf, *r.trace, eval_cfg);
          }
          if (r.model) {
            std::ofstream cf(dir / "curve.csv");
            write_curve_csv(cf, r.model->curve, {{"key", r.model->key}, {"seed", seed}, {"config_hash", hex64(config_hash(train_cfg))}});
          }
          timing << algo << ',' << spec.axis << ',' << fmt(value) << ',' << seed << ',' << fmt(r.row.wall_time) << "\n";
          if (progress) progress(name + ": total average AoI " + fmt(r.row.total_average_aoi));
          result.rows.push_back(std::move(r.row));
        } catch (const Error& e) {
          result.failures.push_back(name + ": " + e.what());
          if (progress) progress(name + " FAILED: " + e.what());
        }
      }
    }
  }
  std::ofstream metrics(spec.out_dir / "metrics.csv");
  write_metrics_csv(metrics, result.rows);
  return result;
}

/// Re-runs one cell from its `meta.json`.
inline MetricsRow rerun_cell(const fs::path& meta, const fs::path& cache_dir = {}) {
  std::ifstream in(meta);
  if (!in) fail(ErrorCode::kIo, "cannot open " + meta.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, meta.string() + ": " + e.what());
  }
  ModelStore store(cache_dir, {});
  return run_cell(cell_from_json(j), store).row;
}

// ---------------------------------------------------------------------------
// Summaries

/// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(ErrorCode::kDimensionMismatch, "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

struct CellSummary {
  std::string algorithm;
  double value = 0.0;
  int seeds = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct Summary {
  std::string axis;
  std::vector<CellSummary> cells;
  std::map<double, std::vector<std::string>> ordering;  // best (lowest AoI) first
  std::vector<std::string> warnings;

  const CellSummary* find(const std::string& algo, double value) const {
    for (const auto& c : cells) {
      if (c.algorithm == algo && c.value == value) return &c;
    }
    return nullptr;
  }
};

inline Summary summarize(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) fail(ErrorCode::kDimensionMismatch, "no metrics rows to summarize");
  Summary s;
  s.axis = rows.front().axis;
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  std::vector<std::string> algo_order;
  for (const auto& r : rows) {
    groups[{r.algorithm, r.value}].push_back(r.total_average_aoi);
    if (std::find(algo_order.begin(), algo_order.end(), r.algorithm) == algo_order.end()) algo_order.push_back(r.algorithm);
  }
  for (const auto& [key, v] : groups) {
    CellSummary c{key.first, key.second, static_cast<int>(v.size()), median(v), quantile(v, 0.25), quantile(v, 0.75)};
    if (c.seeds < 3) {
      s.warnings.push_back(c.algorithm + " at " + fmt(c.value) + ": only " + std::to_string(c.seeds) +
                           " seed(s); comparisons need at least 3");
    }
    s.cells.push_back(c);
  }
  std::map<double, std::vector<const CellSummary*>> by_value;
  for (const auto& c : s.cells) by_value[c.value].push_back(&c);
  for (auto& [value, cs] : by_value) {
    std::stable_sort(cs.begin(), cs.end(), [](const CellSummary* a, const CellSummary* b) { return a->median < b->median; });
    for (const auto* c : cs) s.ordering[value].push_back(c->algorithm);
  }
  return s;
}

inline void write_summary(std::ostream& out, const Summary& s) {
  out << "algorithm,axis,value,seeds,median,q1,q3\n";
  for (const auto& c : s.cells) {
    out << c.algorithm << ',' << s.axis << ',' << fmt(c.value) << ',' << c.seeds << ',' << fmt(c.median) << ','
        << fmt(c.q1) << ',' << fmt(c.q3) << "\n";
  }
  for (const auto& [value, order] : s.ordering) {
    out << "# ordering " << s.axis << "=" << fmt(value) << ":";
    for (std::size_t i = 0; i < order.size(); ++i) out << (i ? " < " : " ") << order[i];
    out << "\n";
  }
  for (const auto& w : s.warnings) out << "# warning: " << w << "\n";
}

}  // namespace uavaoi
