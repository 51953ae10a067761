#include <gtest/gtest.h>

#include "photofab/cost_model.hpp"

namespace photofab {
namespace {

constexpr double kN = 1e9;
const Extent3 kRack{4, 4, 4};

CostParams bandwidth_only() {
  CostParams p;
  p.alpha = 0.0;
  return p;
}

TEST(CostParams, FullEgressIsSixLinks) {
  const CostParams p = CostParams::from_config(ClusterConfig{});
  EXPECT_DOUBLE_EQ(p.beta_unit, 1.0 / 300e9);
  EXPECT_DOUBLE_EQ(p.alpha, 1e-6);
  EXPECT_DOUBLE_EQ(p.reconfig, 3.7e-6);
}

TEST(RingReduceScatter, ElectricalEightChipRing) {
  const CollectiveCost c = ring_reduce_scatter(8, kN, 1.0 / 3.0);
  EXPECT_EQ(c.alpha_steps, 7);
  EXPECT_DOUBLE_EQ(c.beta_bytes, kN * 7.0 / 8.0 * 3.0);
  EXPECT_EQ(c.reconfigs, 0);
}

TEST(RingReduceScatter, OpticalEightChipRingWithSetup) {
  CollectiveCost c = ring_reduce_scatter(8, kN, 1.0);
  c.reconfigs = 1;
  const CostParams p;
  EXPECT_DOUBLE_EQ(c.total_seconds(p), 7 * p.alpha + p.reconfig + kN * 7.0 / 8.0 * p.beta_unit);
}

TEST(RingReduceScatter, SmallRings) {
  const CollectiveCost four = ring_all_gather(4, kN, 1.0);
  EXPECT_EQ(four.alpha_steps, 3);
  EXPECT_DOUBLE_EQ(four.beta_bytes, kN * 0.75);
  const CollectiveCost two = ring_all_gather(2, kN, 1.0);
  EXPECT_EQ(two.alpha_steps, 1);
  EXPECT_DOUBLE_EQ(two.beta_bytes, kN / 2);
  const CollectiveCost one = ring_reduce_scatter(1, kN, 1.0);
  EXPECT_EQ(one.alpha_steps, 0);
  EXPECT_DOUBLE_EQ(one.beta_bytes, 0.0);
  EXPECT_DOUBLE_EQ(one.total_seconds(CostParams{}), 0.0);
}

TEST(RingReduceScatter, AllGatherMirrorsReduceScatter) {
  const CollectiveCost rs = ring_reduce_scatter(8, kN, 1.0 / 3.0);
  const CollectiveCost ag = ring_all_gather(8, kN, 1.0 / 3.0);
  EXPECT_EQ(rs.alpha_steps, ag.alpha_steps);
  EXPECT_DOUBLE_EQ(rs.beta_bytes, ag.beta_bytes);
}

TEST(RingReduceScatter, RejectsBadArguments) {
  EXPECT_THROW(ring_reduce_scatter(0, kN, 1.0), std::invalid_argument);
  EXPECT_THROW(ring_reduce_scatter(4, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ring_reduce_scatter(4, kN, 0.0), std::invalid_argument);
  EXPECT_THROW(ring_reduce_scatter(4, kN, 1.5), std::invalid_argument);
}

TEST(BucketAllReduce, TwoDimsAtTwoThirds) {
  const CollectiveCost c = bucket_allreduce({4, 4}, kN, 2.0 / 3.0);
  EXPECT_EQ(c.alpha_steps, 12);
  EXPECT_NEAR(c.beta_bytes, 2 * kN * 15.0 / 16.0 * 1.5, 1e-3);
}

TEST(BucketAllReduce, OneDimIsTwoRings) {
  const CollectiveCost c = bucket_allreduce({8}, kN, 0.5);
  const CollectiveCost rs = ring_reduce_scatter(8, kN, 0.5);
  EXPECT_EQ(c.alpha_steps, 2 * rs.alpha_steps);
  EXPECT_DOUBLE_EQ(c.beta_bytes, 2 * rs.beta_bytes);
}

TEST(BucketAllReduce, CubeVersusFlatRing) {
  const CollectiveCost cube = bucket_allreduce({2, 2, 2}, kN, 1.0);
  const CollectiveCost flat = bucket_allreduce({8}, kN, 1.0);
  EXPECT_EQ(cube.alpha_steps, 6);
  EXPECT_EQ(flat.alpha_steps, 14);
  EXPECT_NEAR(cube.beta_bytes, flat.beta_bytes, 1e-3);
}

TEST(BucketAllReduce, PerDimFractions) {
  const CollectiveCost c = bucket_allreduce({4, 2}, kN, std::vector<double>{1.0, 0.5});
  // RS 4 at N, RS 2 at N/4, and the mirrored gathers.
  EXPECT_NEAR(c.beta_bytes, 2 * (kN * 0.75 + kN / 4 * 0.5 / 0.5), 1e-3);
  EXPECT_THROW(bucket_allreduce({4, 2}, kN, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(BucketAllReduce, AllReduceIsScatterPlusGather) {
  const CollectiveCost rs = ring_reduce_scatter(16, kN, 0.25);
  const CollectiveCost ag = ring_all_gather(16, kN, 0.25);
  const CollectiveCost ar = bucket_allreduce({16}, kN, 0.25);
  EXPECT_EQ((rs + ag).alpha_steps, ar.alpha_steps);
  EXPECT_DOUBLE_EQ((rs + ag).beta_bytes, ar.beta_bytes);
}

TEST(TrainIterTime, OneUsableDimGivesTripleCommBandwidth) {
  const CostParams p = bandwidth_only();
  const IterTime base = train_iter_time(kN, 0.0, {4, 2, 1}, kRack, Mode::baseline(), p);
  const IterTime lux = train_iter_time(kN, 0.0, {4, 2, 1}, kRack, Mode::morphlux(), p);
  EXPECT_NEAR(base.comm_seconds / lux.comm_seconds, 3.0, 1e-12);
  EXPECT_NEAR(base.comm.beta_bytes / lux.comm.beta_bytes, 3.0, 1e-12);
}

TEST(TrainIterTime, ComputeDominatedRatioApproachesOne) {
  const CostParams p;
  const IterTime base = train_iter_time(kN, 1e4, {4, 2, 1}, kRack, Mode::baseline(), p);
  const IterTime lux = train_iter_time(kN, 1e4, {4, 2, 1}, kRack, Mode::morphlux(), p);
  EXPECT_NEAR(base.seconds / lux.seconds, 1.0, 1e-5);
}

TEST(TrainIterTime, EvenSplitGivesOnePointFive) {
  const CostParams p = bandwidth_only();
  const Extent3 slice{2, 2, 2};
  const double comm = train_iter_time(kN, 0.0, slice, kRack, Mode::baseline(), p).comm_seconds;
  const IterTime base = train_iter_time(kN, comm, slice, kRack, Mode::baseline(), p);
  const IterTime lux = train_iter_time(kN, comm, slice, kRack, Mode::morphlux(), p);
  EXPECT_NEAR(base.seconds / lux.seconds, 1.5, 1e-12);
}

TEST(TrainIterTime, SingleChipHasNoCommunication) {
  const IterTime t = train_iter_time(kN, 0.5, {1, 1, 1}, kRack, Mode::baseline(), CostParams{});
  EXPECT_DOUBLE_EQ(t.comm_seconds, 0.0);
  EXPECT_DOUBLE_EQ(t.seconds, 0.5);
}

TEST(TrainIterTime, IciBetweenBaselineAndMorphLux) {
  const CostParams p;
  const Extent3 slice{2, 2, 4};
  const double base = train_iter_time(kN, 0.0, slice, kRack, Mode::baseline(), p).seconds;
  const double ici = train_iter_time(kN, 0.0, slice, kRack, Mode::ici(0.5), p).seconds;
  const double lux = train_iter_time(kN, 0.0, slice, kRack, Mode::morphlux(), p).seconds;
  EXPECT_LT(ici, base);
  EXPECT_LT(lux, ici);
}

}  // namespace
}  // namespace photofab
