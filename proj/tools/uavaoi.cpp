// uavaoi: train, evaluate and sweep UAV data-collection policies.
//
//   uavaoi train --algo qmix --seed 1
//   uavaoi eval --algo cluster --seeds 1,2,3
//   uavaoi sweep --spec configs/sweep_uavs.json
//   uavaoi trace --algo qmix --seed 1 -o trace.csv
//   uavaoi summarize out/metrics.csv
//   uavaoi rerun out/cells/qmix_none=0_seed1/meta.json
//
// Output goes below --out, or $UAVAOI_OUT, or ./out.
// Exit codes: 0 ok, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "uavaoi/uavaoi.hpp"

using namespace uavaoi;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string profile = "desk";
  std::string world;
  std::string learner;
  std::string out;
  std::string cache;
  std::string algo = "qmix";
  std::vector<std::uint64_t> seeds{1};
  int episodes = -1;
  int eval_episodes = 50;
  bool quiet = false;
};

ExperimentSpec base_spec(const Options& o) {
  ExperimentSpec s;
  s.base = profile(o.profile);
  if (!o.world.empty()) s.base = load_config(o.world, s.base);
  if (!o.learner.empty()) {
    std::ifstream in(o.learner);
    if (!in) fail(ErrorCode::kConfig, "cannot open " + o.learner);
    try {
      s.learner = learner_params_from_json(nlohmann::json::parse(in), s.learner);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, o.learner + ": " + e.what());
    }
  }
  if (o.episodes >= 0) s.learner.episodes = o.episodes;
  s.eval_episodes = o.eval_episodes;
  if (!o.out.empty()) {
    s.out_dir = o.out;
  } else if (const char* env = std::getenv("UAVAOI_OUT")) {
    s.out_dir = env;
  }
  if (!o.cache.empty()) s.cache_dir = o.cache;
  s.algorithms = {o.algo};
  s.seeds = o.seeds;
  return s;
}

ProgressFn logger(const Options& o) {
  if (o.quiet) return {};
  return [](const std::string& msg) { std::cerr << msg << std::endl; };
}

void print_row(const MetricsRow& r) { std::cout << csv_line(r) << "\n"; }

int cmd_train(const Options& o) {
  const ExperimentSpec s = base_spec(o);
  validate(s);
  if (!is_learned(o.algo)) fail(ErrorCode::kConfig, "'" + o.algo + "' has nothing to train");
  for (auto seed : s.seeds) {
    const TrainedModel m = train_or_load(s.base, o.algo, s.learner, seed, s.cache(), logger(o));
    const std::size_t n = m.curve.size(), w = std::min<std::size_t>(n, 500);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
      first += m.curve[i].cumulative_cost;
      last += m.curve[n - w + i].cumulative_cost;
    }
    std::cout << o.algo << " seed " << seed << (m.from_cache ? " (cached)" : "") << ": first-" << w
              << " mean cost " << fmt(first / w) << ", last-" << w << " mean cost " << fmt(last / w)
              << "\n  checkpoint " << (s.cache() / (m.key + ".ckpt")).string() << "\n";
  }
  return 0;
}

int cmd_eval(const Options& o) {
  const ExperimentSpec s = base_spec(o);
  validate(s);
  ModelStore store(s.cache(), logger(o));
  std::cout << kMetricsHeader << "\n";
  for (auto seed : s.seeds) {
    const CellSpec cell{s.base, s.base, o.algo, "none", 0.0, seed, s.learner, s.eval_episodes};
    print_row(run_cell(cell, store).row);
  }
  return 0;
}

int cmd_trace(const Options& o, const std::string& output) {
  ExperimentSpec s = base_spec(o);
  validate(s);
  ModelStore store(s.cache(), logger(o));
  const CellSpec cell{s.base, s.base, o.algo, "none", 0.0, s.seeds.front(), s.learner, 1};
  const CellResult r = run_cell(cell, store, true);
  if (output.empty() || output == "-") {
    write_trace_csv(std::cout, *r.trace, s.base);
  } else {
    const fs::path path(output);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorCode::kIo, "cannot write " + output);
    write_trace_csv(out, *r.trace, s.base);
  }
  std::cerr << o.algo << " seed " << s.seeds.front() << ": average AoI " << fmt(r.row.total_average_aoi)
            << ", collisions " << r.row.collision_count << "\n";
  return 0;
}

int cmd_sweep(const Options& o, const std::string& spec_path, const std::string& axis,
              const std::vector<double>& values, const std::vector<std::string>& algos, bool no_traces) {
  ExperimentSpec s = base_spec(o);
  s.algorithms = ExperimentSpec{}.algorithms;
  s.seeds = ExperimentSpec{}.seeds;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) fail(ErrorCode::kConfig, "cannot open " + spec_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, spec_path + ": " + e.what());
    }
    s = experiment_from_json(j, s);
  }
  if (!axis.empty()) s.axis = axis;
  if (!values.empty()) s.values = values;
  if (!algos.empty()) s.algorithms = algos;
  if (o.seeds != Options{}.seeds) s.seeds = o.seeds;
  if (no_traces) s.traces = false;
  validate(s);
  const CampaignResult r = run_experiment(s, logger(o));
  std::cout << "wrote " << r.rows.size() << " rows to " << (s.out_dir / "metrics.csv").string() << "\n";
  if (!r.rows.empty()) write_summary(std::cout, summarize(r.rows));
  for (const auto& f : r.failures) std::cerr << "failed: " << f << "\n";
  return r.failures.empty() ? 0 : kExitRuntime;
}

int cmd_summarize(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  write_summary(std::cout, summarize(read_metrics_csv(in)));
  return 0;
}

int cmd_rerun(const Options& o, const std::string& meta) {
  std::cout << kMetricsHeader << "\n";
  print_row(rerun_cell(meta, o.cache));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV data collection with age-of-information objectives"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--profile", o.profile, "base world: desk or full")->capture_default_str();
  app.add_option("--config", o.world, "world config JSON overlaid on the profile");
  app.add_option("--learner", o.learner, "learner hyperparameters JSON");
  app.add_option("--out", o.out, "output root (default $UAVAOI_OUT or ./out)");
  app.add_option("--cache", o.cache, "checkpoint cache (default <out>/cache)");
  app.add_flag("-q,--quiet", o.quiet, "no progress messages");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--algo", o.algo, "qmix, qmix-nomask, idqn, nearest, cluster or random")->capture_default_str();
    sub->add_option("--seeds,--seed", o.seeds, "seeds")->delimiter(',');
    sub->add_option("--episodes", o.episodes, "training episodes");
    sub->add_option("--eval-episodes", o.eval_episodes, "greedy evaluation episodes")->capture_default_str();
  };

  auto* train = app.add_subcommand("train", "train (or load) a learned policy");
  common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a policy on the base world");
  common(eval);
  std::string trace_out;
  auto* trace = app.add_subcommand("trace", "write one evaluation trajectory as CSV");
  common(trace);
  trace->add_option("-o,--output", trace_out, "output file (default stdout)");

  std::string spec_path, axis;
  std::vector<double> values;
  std::vector<std::string> algos;
  bool no_traces = false;
  auto* sweep = app.add_subcommand("sweep", "run a seeded campaign over one axis");
  common(sweep);
  sweep->add_option("--spec", spec_path, "experiment JSON");
  sweep->add_option("--axis", axis, "none, num_uavs, num_sns, xi_th_db, uav_energy_max, harvest_prob");
  sweep->add_option("--values", values, "sweep values")->delimiter(',');
  sweep->add_option("--algos", algos, "algorithms")->delimiter(',');
  sweep->add_flag("--no-traces", no_traces, "skip per-cell trajectory CSVs");

  std::string metrics_path;
  auto* summ = app.add_subcommand("summarize", "medians, IQR and ordering from a metrics CSV");
  summ->add_option("metrics", metrics_path, "metrics CSV")->required();

  std::string meta_path;
  auto* rerun = app.add_subcommand("rerun", "reproduce one campaign cell from its meta.json");
  rerun->add_option("meta", meta_path, "cell meta.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*trace) return cmd_trace(o, trace_out);
    if (*sweep) return cmd_sweep(o, spec_path, axis, values, algos, no_traces);
    if (*summ) return cmd_summarize(metrics_path);
    if (*rerun) return cmd_rerun(o, meta_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
