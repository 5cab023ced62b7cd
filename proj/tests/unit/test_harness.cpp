#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavaoi/harness.hpp"

using namespace uavaoi;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LearnerParams tiny_params() {
  LearnerParams p;
  p.episodes = 6;
  p.hidden = 8;
  p.mixer_embed = 4;
  p.hyper_hidden = 4;
  p.batch_episodes = 2;
  p.warmup_episodes = 2;
  p.replay_capacity = 10;
  p.target_update = 2;
  return p;
}

// -- axes ----------------------------------------------------------------------

TEST(ApplyAxis, UavCountRegeneratesLayout) {
  const WorldConfig base = desk_profile();
  const WorldConfig c = apply_axis(base, "num_uavs", 3);
  EXPECT_EQ(c.num_uavs, 3);
  EXPECT_EQ(c.starts.size(), 3u);
  EXPECT_EQ(c.starts[1].x, 380.0);
  EXPECT_EQ(to_json(c)["sn_positions"], to_json(base)["sn_positions"]);
  EXPECT_THROW(apply_axis(base, "num_uavs", 1.5), Error);
}

TEST(ApplyAxis, SensorCountRegeneratesNodesAndPenalty) {
  const WorldConfig base = desk_profile();
  const WorldConfig c = apply_axis(base, "num_sns", 12);
  EXPECT_EQ(c.sn_positions.size(), 12u);
  EXPECT_EQ(c.harvest_prob.size(), 12u);
  EXPECT_EQ(c.collision_penalty, 12.0 * c.delta_max);
}

TEST(ApplyAxis, ChannelAndHarvestAxes) {
  const WorldConfig base = desk_profile();
  const WorldConfig x = apply_axis(base, "xi_th_db", 7);
  EXPECT_NEAR(x.xi_th, std::pow(10.0, 0.7), 1e-12);
  const WorldConfig h = apply_axis(base, "harvest_prob", 0.3);
  EXPECT_EQ(h.harvest_prob, std::vector<double>(base.num_sns, 0.3));
  EXPECT_EQ(to_json(apply_axis(base, "none", 0)), to_json(base));
  EXPECT_THROW(apply_axis(base, "gravity", 1), Error);
  EXPECT_THROW(apply_axis(base, "harvest_prob", 1.5), Error);
  EXPECT_TRUE(eval_only_axis("xi_th_db"));
  EXPECT_FALSE(eval_only_axis("num_uavs"));
}

// -- statistics ------------------------------------------------------------------

TEST(Quantile, MedianAndQuartiles) {
  EXPECT_EQ(median({10, 12, 14}), 12.0);
  EXPECT_EQ(median({14, 10}), 12.0);
  EXPECT_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_EQ(quantile({1, 2, 3, 4, 5}, 0.75), 4.0);
  EXPECT_EQ(quantile({7}, 0.25), 7.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

MetricsRow row(const std::string& algo, double value, std::uint64_t seed, double aoi) {
  MetricsRow r;
  r.algorithm = algo;
  r.axis = "xi_th_db";
  r.value = value;
  r.seed = seed;
  r.total_average_aoi = aoi;
  r.config_hash = "00";
  return r;
}

TEST(Summarize, OrderingAndWarnings) {
  std::vector<MetricsRow> rows;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    rows.push_back(row("qmix", 5, s, 100 + s));
    rows.push_back(row("nearest", 5, s, 120 + s));
    rows.push_back(row("cluster", 5, s, 90 + s));
  }
  rows.push_back(row("qmix", 7, 1, 130));
  const Summary s = summarize(rows);
  EXPECT_EQ(s.ordering.at(5), (std::vector<std::string>{"cluster", "qmix", "nearest"}));
  EXPECT_EQ(s.ordering.at(7), (std::vector<std::string>{"qmix"}));
  ASSERT_NE(s.find("qmix", 5), nullptr);
  EXPECT_EQ(s.find("qmix", 5)->median, 102.0);
  EXPECT_EQ(s.find("qmix", 5)->q1, 101.5);
  EXPECT_EQ(s.warnings.size(), 1u);  // qmix at 7 has one seed
  std::ostringstream os;
  write_summary(os, s);
  EXPECT_NE(os.str().find("# ordering xi_th_db=5: cluster < qmix < nearest"), std::string::npos);
  EXPECT_THROW(summarize({}), Error);
}

// -- CSV -------------------------------------------------------------------------

TEST(MetricsCsv, RoundTripIsExact) {
  std::vector<MetricsRow> rows{row("qmix", 0.1, 3, 1.0 / 3.0), row("idqn", 5, 4, 123.456789012345678)};
  rows[1].collision_count = 2;
  rows[1].mean_residual_energy = 1e4 / 7.0;
  std::stringstream ss;
  write_metrics_csv(ss, rows);
  const auto back = read_metrics_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(csv_line(back[i]), csv_line(rows[i]));
  EXPECT_EQ(back[0].total_average_aoi, 1.0 / 3.0);
  std::stringstream bad("algorithm,oops\n");
  EXPECT_THROW(read_metrics_csv(bad), Error);
}

TEST(CurveCsv, RoundTripKeepsMissingLoss) {
  std::vector<CurveRow> c(2);
  c[0].episode = 1;
  c[0].cumulative_cost = 7001.5;
  c[0].epsilon = 0.99;
  c[1].episode = 2;
  c[1].loss = 0.125;
  c[1].collisions = 1;
  std::stringstream ss;
  write_curve_csv(ss, c, {{"seed", 1}});
  const auto back = read_curve_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_TRUE(std::isnan(back[0].loss));
  EXPECT_EQ(back[0].cumulative_cost, 7001.5);
  EXPECT_EQ(back[1].loss, 0.125);
  EXPECT_EQ(back[1].collisions, 1);
}

TEST(TrainingKey, DependsOnEveryInput) {
  const WorldConfig cfg = desk_profile();
  const LearnerParams p = tiny_params();
  const std::string k = training_key(cfg, "qmix", p, 1);
  EXPECT_EQ(k, training_key(cfg, "qmix", p, 1));
  EXPECT_NE(k, training_key(cfg, "qmix", p, 2));
  EXPECT_NE(k, training_key(cfg, "idqn", p, 1));
  EXPECT_NE(k, training_key(cfg, "qmix-nomask", p, 1));
  LearnerParams q = p;
  q.lr = 1e-3;
  EXPECT_NE(k, training_key(cfg, "qmix", q, 1));
  EXPECT_NE(k, training_key(apply_axis(cfg, "xi_th_db", 3), "qmix", p, 1));
}

// -- campaigns ---------------------------------------------------------------------

TEST(Campaign, HeuristicsOnlyNeedNoTraining) {
  TempDir dir("uavaoi_harness_heur");
  ExperimentSpec spec;
  spec.algorithms = {"cluster", "random"};
  spec.seeds = {1};
  spec.eval_episodes = 2;
  spec.out_dir = dir.path();
  const CampaignResult r = run_experiment(spec);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_FALSE(fs::exists(spec.cache()));
  const WorldConfig cfg = desk_profile();
  for (const auto& m : r.rows) {
    EXPECT_GE(m.total_average_aoi, cfg.num_sns);
    EXPECT_LE(m.total_average_aoi, cfg.num_sns * cfg.delta_max);
    EXPECT_GE(m.mean_residual_energy, 0.0);
  }
  EXPECT_TRUE(fs::exists(dir.path() / "cells" / "cluster_none=0_seed1" / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "wall_time.csv"));
}

TEST(Campaign, FailedCellsAreReportedAndSkipped) {
  TempDir dir("uavaoi_harness_fail");
  ExperimentSpec spec;
  spec.axis = "uav_energy_max";
  spec.values = {100.0, 2.4e4};  // 100 J cannot reach the stop
  spec.algorithms = {"cluster"};
  spec.seeds = {1};
  spec.eval_episodes = 1;
  spec.out_dir = dir.path();
  const CampaignResult r = run_experiment(spec);
  EXPECT_EQ(r.rows.size(), 1u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_NE(r.failures[0].find("uav_energy_max=100"), std::string::npos);
}

TEST(Campaign, InvalidSpecsAreRejected) {
  ExperimentSpec spec;
  spec.algorithms = {"vdn"};
  EXPECT_THROW(run_experiment(spec), Error);
  spec = {};
  spec.axis = "gravity";
  EXPECT_THROW(run_experiment(spec), Error);
  spec = {};
  spec.axis = "harvest_prob";
  spec.values = {2.0};
  EXPECT_THROW(run_experiment(spec), Error);
}

TEST(Campaign, RepeatRunsAndCellRerunsAreBitExact) {
  TempDir a("uavaoi_harness_det_a"), b("uavaoi_harness_det_b");
  ExperimentSpec spec;
  spec.algorithms = {"qmix", "nearest", "idqn"};
  spec.seeds = {7};
  spec.learner = tiny_params();
  spec.eval_episodes = 2;
  spec.out_dir = a.path();
  const CampaignResult ra = run_experiment(spec);
  spec.out_dir = b.path();
  const CampaignResult rb = run_experiment(spec);
  ASSERT_EQ(ra.rows.size(), 3u);
  EXPECT_EQ(slurp(a.path() / "metrics.csv"), slurp(b.path() / "metrics.csv"));

  // from embedded metadata, without any cache
  const fs::path cell = a.path() / "cells" / "nearest_none=0_seed7";
  const MetricsRow again = rerun_cell(cell / "meta.json");
  EXPECT_EQ(csv_line(again), csv_line(ra.rows[1]));
  const std::string stored = slurp(cell / "metrics.csv");
  EXPECT_NE(stored.find(csv_line(again)), std::string::npos);
}

TEST(Campaign, CachedModelsAreReused) {
  TempDir dir("uavaoi_harness_cache");
  const WorldConfig cfg = desk_profile();
  const TrainedModel first = train_or_load(cfg, "qmix", tiny_params(), 3, dir.path());
  EXPECT_FALSE(first.from_cache);
  const TrainedModel second = train_or_load(cfg, "qmix", tiny_params(), 3, dir.path());
  EXPECT_TRUE(second.from_cache);
  ASSERT_EQ(first.curve.size(), second.curve.size());
  for (std::size_t i = 0; i < first.curve.size(); ++i) {
    EXPECT_EQ(first.curve[i].cumulative_cost, second.curve[i].cumulative_cost);
  }
  auto pa = first.learner->online_params(), pb = second.learner->online_params();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

TEST(Campaign, EvalOnlyAxisTrainsOnce) {
  TempDir dir("uavaoi_harness_evalonly");
  ExperimentSpec spec;
  spec.axis = "xi_th_db";
  spec.values = {3, 7};
  spec.algorithms = {"qmix"};
  spec.seeds = {2};
  spec.learner = tiny_params();
  spec.eval_episodes = 1;
  spec.out_dir = dir.path();
  const CampaignResult r = run_experiment(spec);
  ASSERT_EQ(r.rows.size(), 2u);
  int checkpoints = 0;
  for (const auto& e : fs::directory_iterator(spec.cache())) checkpoints += e.path().extension() == ".ckpt";
  EXPECT_EQ(checkpoints, 1);
  EXPECT_NE(r.rows[0].config_hash, r.rows[1].config_hash);
}

}  // namespace
