#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <sstream>

#include "photofab/workload.hpp"

namespace photofab {
namespace {

SliceDistribution only(const Extent3& shape) { return SliceDistribution({{shape, 1.0}}); }

ExperimentConfig small_run(int trials) {
  ExperimentConfig config;
  config.workload.trials = trials;
  config.threads = 1;
  return config;
}

TEST(TrialRng, StreamsAreSeededPerTrial) {
  Rng a = trial_rng(7, 0);
  Rng b = trial_rng(7, 0);
  Rng c = trial_rng(7, 1);
  Rng d = trial_rng(8, 0);
  const auto first = a();
  EXPECT_EQ(first, b());
  EXPECT_NE(first, c());
  EXPECT_NE(first, d());
}

TEST(SliceDistribution, ValidatesWeights) {
  EXPECT_THROW(SliceDistribution({{{2, 2, 1}, 0.5}}), ConfigError);
  EXPECT_THROW(SliceDistribution({{{2, 2, 1}, 1.5}, {{2, 2, 2}, -0.5}}), ConfigError);
  EXPECT_THROW(SliceDistribution({}), ConfigError);
  const SliceDistribution d({{{2, 2, 2}, 0.5}, {{2, 2, 1}, 0.5}});
  EXPECT_EQ(d.min_volume(), 4);
}

TEST(SliceDistribution, SamplesOnlyListedShapes) {
  const SliceDistribution d(WorkloadConfig{}.distribution);
  Rng rng = trial_rng(1, 0);
  std::set<int> sizes;
  for (int i = 0; i < 400; ++i) sizes.insert(d.sample(rng).volume());
  EXPECT_EQ(sizes, (std::set<int>{4, 8, 16, 32}));
}

TEST(FillCluster, EightCubesFillOneRack) {
  ClusterConfig config;
  config.racks_count = 1;
  Cluster cluster(config);
  Rng rng = trial_rng(1, 0);
  const FillTrace trace = fill_cluster(cluster, only({2, 2, 2}), rng);
  EXPECT_EQ(trace.allocated.size(), 8u);
  EXPECT_EQ(cluster.free_chips(), 0);
}

TEST(FillCluster, DefaultFillPacksEveryChip) {
  Cluster cluster(ClusterConfig{});
  Rng rng = trial_rng(7, 0);
  const FillTrace trace =
      fill_cluster(cluster, SliceDistribution(WorkloadConfig{}.distribution), rng);
  EXPECT_GE(cluster.allocated_chips(), 0.95 * cluster.total_chips());
  // Golden values for seed 7, trial 0.
  EXPECT_EQ(cluster.allocated_chips(), 4096);
  EXPECT_EQ(trace.allocated.size(), 273u);
}

TEST(FillCluster, FullClusterYieldsEmptyTrace) {
  ClusterConfig config;
  config.racks_count = 2;
  Cluster cluster(config);
  Rng rng = trial_rng(3, 0);
  fill_cluster(cluster, only({4, 4, 4}), rng);
  ASSERT_EQ(cluster.free_chips(), 0);
  const FillTrace again = fill_cluster(cluster, only({2, 2, 1}), rng);
  EXPECT_TRUE(again.allocated.empty());
}

TEST(Churn, FullFractionEmptiesCluster) {
  Cluster cluster(ClusterConfig{});
  Rng rng = trial_rng(2, 0);
  const FillTrace trace =
      fill_cluster(cluster, SliceDistribution(WorkloadConfig{}.distribution), rng);
  const auto removed = churn(cluster, 1.0, ChurnMode::kBySlice, rng);
  EXPECT_EQ(removed.size(), trace.allocated.size());
  EXPECT_TRUE(cluster.slices().empty());
  EXPECT_EQ(cluster.free_chips(), cluster.total_chips());
}

TEST(Churn, TwentyPercentOfSlices) {
  Cluster cluster(ClusterConfig{});
  Rng rng = trial_rng(4, 0);
  fill_cluster(cluster, SliceDistribution(WorkloadConfig{}.distribution), rng);
  const auto live = static_cast<long long>(cluster.slices().size());
  const auto removed = churn(cluster, 0.2, ChurnMode::kBySlice, rng);
  EXPECT_EQ(static_cast<long long>(removed.size()), std::llround(0.2 * live));
  EXPECT_EQ(std::set<SliceId>(removed.begin(), removed.end()).size(), removed.size());
}

TEST(Churn, ThirtyPercentFreeChips) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Cluster cluster(ClusterConfig{});
    Rng rng = trial_rng(seed, 0);
    fill_cluster(cluster, SliceDistribution(WorkloadConfig{}.distribution), rng);
    churn(cluster, 0.3, ChurnMode::kByFreeChips, rng);
    const double free = static_cast<double>(cluster.free_chips()) / cluster.total_chips();
    EXPECT_GE(free, 0.3);
    EXPECT_LE(free, 0.3 + 32.0 / 4096.0);
  }
}

TEST(Churn, RejectsBadFraction) {
  Cluster cluster(ClusterConfig{});
  Rng rng = trial_rng(1, 0);
  EXPECT_THROW(churn(cluster, 0.0, ChurnMode::kBySlice, rng), std::invalid_argument);
  EXPECT_THROW(churn(cluster, 1.2, ChurnMode::kByFreeChips, rng), std::invalid_argument);
}

TEST(ExperimentId, ParsesNames) {
  EXPECT_EQ(parse_experiment_id("e3"), ExperimentId::kE3);
  EXPECT_EQ(parse_experiment_id("E1"), ExperimentId::kE1);
  EXPECT_EQ(to_string(ExperimentId::kE4), "e4");
  EXPECT_THROW(parse_experiment_id("e5"), ConfigError);
}

TEST(RunE1, RowsCoverEveryRack) {
  const auto rows = run_e1(small_run(2), 5);
  ASSERT_EQ(rows.size(), 128u);
  for (const E1Row& r : rows) {
    EXPECT_GE(r.index, 0.0);
    EXPECT_LT(r.index, 1.0);
    EXPECT_LE(r.largest_block, r.free_chips);
  }
}

TEST(RunE2, MorphLuxUsesEveryPort) {
  const auto rows = run_e2(small_run(1), 5);
  ASSERT_EQ(rows.size(), 64u * 5);
  for (const E2Row& r : rows) {
    if (r.mode == "morphlux") {
      EXPECT_EQ(r.ports_used, r.ports_total);
      EXPECT_DOUBLE_EQ(r.bw_fraction, 1.0);
    }
    EXPECT_LE(r.ports_used, r.ports_total);
  }
}

TEST(RunE3, MorphLuxMatchesIdeal) {
  for (const E3Trial& t : run_e3(small_run(2), 5)) {
    ASSERT_EQ(t.modes.size(), 4u);
    EXPECT_EQ(t.modes[2].mode, "morphlux");
    EXPECT_EQ(t.modes[2].success, t.modes[3].success) << t.stream;
    EXPECT_GE(t.modes[2].successes, t.modes[0].successes);
    EXPECT_GE(t.modes[1].successes, t.modes[0].successes);
  }
}

TEST(RunE4, SpeedupsAgainstBaseline) {
  for (const E4Row& r : run_e4(small_run(1), 5)) {
    if (r.mode == "baseline") {
      EXPECT_DOUBLE_EQ(r.speedup_vs_baseline, 1.0);
    }
    if (r.mode == "morphlux") {
      EXPECT_GE(r.speedup_vs_baseline, 1.0);
    }
    EXPECT_LE(r.speedup_vs_baseline, 3.0);
  }
}

TEST(RunExperiment, SameSeedSameBytes) {
  for (ExperimentId id : {ExperimentId::kE1, ExperimentId::kE2, ExperimentId::kE3,
                          ExperimentId::kE4}) {
    ExperimentConfig serial = small_run(3);
    ExperimentConfig pooled = small_run(3);
    pooled.threads = 3;
    std::ostringstream a, b;
    write_csv(a, run_experiment(id, serial, 11));
    write_csv(b, run_experiment(id, pooled, 11));
    EXPECT_EQ(a.str(), b.str()) << to_string(id);
    EXPECT_EQ(to_json(run_experiment(id, serial, 11), false),
              to_json(run_experiment(id, serial, 11), false));
  }
}

TEST(WriteCsv, HeaderAndQuoting) {
  ExperimentResult r;
  r.columns = {"slice", "stream"};
  r.rows.push_back({3, "16,32"});
  std::ostringstream out;
  write_csv(out, r);
  EXPECT_EQ(out.str(), "slice,stream\n3,\"16,32\"\n");
}

TEST(ForEachTrial, VisitsEveryTrialAndRethrows) {
  std::atomic<int> sum{0};
  for_each_trial(10, 4, [&](int t) { sum += t; });
  EXPECT_EQ(sum.load(), 45);
  EXPECT_THROW(for_each_trial(5, 2,
                              [](int t) {
                                if (t == 3) throw std::runtime_error("boom");
                              }),
               std::runtime_error);
}

}  // namespace
}  // namespace photofab
