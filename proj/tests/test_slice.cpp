#include <gtest/gtest.h>

#include <set>

#include "photofab/slice.hpp"

namespace photofab {
namespace {

const Extent3 kRack{4, 4, 4};

TEST(UsableDims, FullPlaneKeepsTwoRings) {
  const UsableDims u = usable_dims({4, 4, 1}, kRack, Mode::baseline());
  EXPECT_EQ(u.dims, (std::vector<Dim>{Dim::X, Dim::Y}));
  EXPECT_FALSE(u.snake);
  EXPECT_DOUBLE_EQ(u.fraction, 2.0 / 3.0);
}

TEST(UsableDims, FullRowKeepsOneRing) {
  const UsableDims u = usable_dims({4, 2, 1}, kRack, Mode::baseline());
  EXPECT_EQ(u.dims, (std::vector<Dim>{Dim::X}));
  EXPECT_DOUBLE_EQ(u.fraction, 1.0 / 3.0);
}

TEST(UsableDims, FullRackKeepsEverything) {
  EXPECT_DOUBLE_EQ(usable_dims({4, 4, 4}, kRack, Mode::baseline()).fraction, 1.0);
}

TEST(UsableDims, SubRackFallsBackToSnake) {
  const UsableDims u = usable_dims({2, 2, 1}, kRack, Mode::baseline());
  EXPECT_TRUE(u.dims.empty());
  EXPECT_TRUE(u.snake);
  EXPECT_DOUBLE_EQ(u.fraction, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(usable_dims({1, 1, 1}, kRack, Mode::baseline()).fraction, 0.0);
}

TEST(UsableDims, MorphLuxAndIci) {
  EXPECT_DOUBLE_EQ(usable_dims({2, 2, 1}, kRack, Mode::morphlux()).fraction, 1.0);
  EXPECT_DOUBLE_EQ(usable_dims({4, 2, 1}, kRack, Mode::ici(0.5)).fraction, 0.5);
  EXPECT_THROW(usable_dims({5, 1, 1}, kRack, Mode::baseline()), std::invalid_argument);
}

TEST(PortUtilization, Examples) {
  EXPECT_DOUBLE_EQ(port_utilization({4, 4, 1}, kRack, Mode::baseline(), 6), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(port_utilization({4, 2, 1}, kRack, Mode::baseline(), 6), 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(port_utilization({2, 2, 1}, kRack, Mode::baseline(), 6), 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(port_utilization({2, 1, 1}, kRack, Mode::morphlux(), 6), 1.0);
  EXPECT_DOUBLE_EQ(port_utilization({2, 4, 4}, kRack, Mode::ici(0.25), 6), 1.0);
}

TEST(Mode, ParsesSpellings) {
  EXPECT_EQ(parse_mode("baseline"), Mode::baseline());
  EXPECT_EQ(parse_mode("MorphLux"), Mode::morphlux());
  EXPECT_EQ(parse_mode("ici0.5"), Mode::ici(0.5));
  EXPECT_EQ(parse_mode("ici:0.25"), Mode::ici(0.25));
  EXPECT_EQ(to_string(Mode::ici(0.7)), "ici0.7");
  EXPECT_THROW(parse_mode("ici1.5"), ConfigError);
  EXPECT_THROW(parse_mode("optical"), ConfigError);
}

TEST(SliceRequest, ParsesShapeAndMode) {
  const SliceRequest r = parse_slice_request("4x2x1:morphlux");
  EXPECT_EQ(r.shape, (Extent3{4, 2, 1}));
  EXPECT_EQ(r.mode, Mode::morphlux());
  EXPECT_EQ(parse_slice_request("2x2x2").mode, Mode::baseline());
  EXPECT_EQ(to_string(r), "4x2x1:morphlux");
}

TEST(LogicalLinks, ClosedAndOpenRings) {
  // Open 4-chain: 3 links; closed 4-ring: 4; extent 2 never doubles.
  EXPECT_EQ(logical_links({4, 1, 1}, {false, false, false}).size(), 3u);
  EXPECT_EQ(logical_links({4, 1, 1}, {true, false, false}).size(), 4u);
  EXPECT_EQ(logical_links({2, 1, 1}, {true, true, true}).size(), 1u);
  EXPECT_EQ(logical_links({2, 2, 2}, {true, true, true}).size(), 12u);
  EXPECT_EQ(logical_links({4, 4, 4}, {true, true, true}).size(), 192u);
}

TEST(SnakeOrder, VisitsEveryPositionThroughNeighbors) {
  for (const Extent3 shape : {Extent3{2, 2, 1}, Extent3{2, 4, 4}, Extent3{4, 4, 4},
                              Extent3{3, 2, 5}, Extent3{1, 1, 1}}) {
    const auto order = snake_order(shape);
    ASSERT_EQ(static_cast<int>(order.size()), shape.volume());
    EXPECT_EQ(std::set<int>(order.begin(), order.end()).size(), order.size());
    EXPECT_EQ(order.front(), 0);
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto a = logical_position(shape, order[i - 1]);
      const auto b = logical_position(shape, order[i]);
      int moved = 0;
      for (int d = 0; d < 3; ++d) moved += std::abs(a[d] - b[d]);
      EXPECT_EQ(moved, 1) << to_string(shape) << " step " << i;
    }
  }
}

TEST(LogicalIndex, RoundTrips) {
  const Extent3 shape{2, 4, 3};
  for (int i = 0; i < shape.volume(); ++i) {
    const auto p = logical_position(shape, i);
    EXPECT_EQ(logical_index(shape, p[0], p[1], p[2]), i);
  }
}

}  // namespace
}  // namespace photofab
