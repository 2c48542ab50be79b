#include <gtest/gtest.h>

#include <cmath>

#include "ddepth/mapping.hpp"
#include "ddepth/rng.hpp"

using namespace ddepth;

namespace {

// 1x1 image looking straight down +z from the grid's min corner plane.
Intrinsics one_pixel() { return {1, 1, 1.0, 1.0, 0.5, 0.5}; }

bool adjacent(VoxelIndex a, VoxelIndex b) {
  int diff = 0;
  for (int i = 0; i < 3; ++i) diff += std::abs(a[i] - b[i]);
  return diff == 1;
}

}  // namespace

TEST(VoxelGrid, LayoutAndIndexing) {
  const VoxelGrid g(0.5, {{0, 0, 0}, {2, 1, 1.2}});
  EXPECT_EQ(g.dims().x, 4);
  EXPECT_EQ(g.dims().y, 2);
  EXPECT_EQ(g.dims().z, 3);
  EXPECT_EQ(g.cell_count(), 24u);
  for (std::size_t i = 0; i < g.cell_count(); ++i) EXPECT_EQ(g.linear(g.unlinear(i)), i);
  EXPECT_FALSE(g.voxel_of({2.1, 0.5, 0.5}).has_value());
  EXPECT_EQ(g.voxel_of({1.2, 0.7, 0.1})->x, 2);
  EXPECT_EQ(g.count(CellState::unknown), 24u);
  EXPECT_THROW(VoxelGrid(0.0, {{0, 0, 0}, {1, 1, 1}}), ValidationError);
  EXPECT_THROW(VoxelGrid(0.1, {{0, 0, 0}, {0, 1, 1}}), ValidationError);
}

TEST(VoxelGrid, UpdatesAreClamped) {
  VoxelGrid g(1.0, {{0, 0, 0}, {1, 1, 1}});
  for (int i = 0; i < 10; ++i) g.add(0, 0.85);
  EXPECT_DOUBLE_EQ(g.logodds(std::size_t{0}), 3.5);
  for (int i = 0; i < 30; ++i) g.add(0, -0.4);
  EXPECT_DOUBLE_EQ(g.logodds(std::size_t{0}), -3.5);
  EXPECT_EQ(g.state(std::size_t{0}), CellState::free);
}

TEST(Traverse, GapFreeAgainstFineSampling) {
  const VoxelGrid g(0.3, {{-2, -2, -2}, {2, 2, 2}});
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const Vec3 a{rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9)};
    const Vec3 b{rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9), rng.uniform(-1.9, 1.9)};
    const auto cells = traverse(g, a, b);
    ASSERT_FALSE(cells.empty());
    EXPECT_TRUE(cells.front() == *g.voxel_of(a));
    EXPECT_TRUE(cells.back() == *g.voxel_of(b));
    for (std::size_t i = 1; i < cells.size(); ++i) ASSERT_TRUE(adjacent(cells[i - 1], cells[i]));
    // oracle: every voxel hit by dense sampling appears in the walk
    for (int s = 0; s <= 4000; ++s) {
      const double t = s / 4000.0;
      const auto v = *g.voxel_of(a + t * (b - a));
      bool found = false;
      for (const auto& c : cells) found = found || c == v;
      ASSERT_TRUE(found);
    }
  }
}

TEST(Traverse, ClipsToGrid) {
  const VoxelGrid g(1.0, {{0, 0, 0}, {4, 1, 1}});
  const auto cells = traverse(g, {-3, 0.5, 0.5}, {9, 0.5, 0.5});
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells.front().x, 0);
  EXPECT_EQ(cells.back().x, 3);
  EXPECT_TRUE(traverse(g, {-3, 5, 0.5}, {9, 5, 0.5}).empty());
}

TEST(Integrate, SinglePixelStraightAhead) {
  const double res = 0.25;
  for (double d : {0.3, 1.1, 2.6, 3.9}) {
    VoxelGrid g(res, {{-0.5, -0.5, 0.0}, {0.5, 0.5, 5.0}});
    CameraPose pose;
    pose.translation = {0.1, 0.1, 0.0};
    integrate_depth_map(g, DepthImage{1, 1, {d}}, pose, one_pixel());
    const std::size_t free_expected = static_cast<std::size_t>(std::ceil(d / res)) - 1;
    EXPECT_EQ(g.count(CellState::occupied), 1u) << d;
    EXPECT_EQ(g.count(CellState::free), free_expected) << d;
    const auto end = *g.voxel_of({0.1, 0.1, d});
    EXPECT_DOUBLE_EQ(g.logodds(end), 0.85);
    for (int z = 0; z < end.z; ++z) EXPECT_DOUBLE_EQ(g.logodds(VoxelIndex{2, 2, z}), -0.4);
  }
}

TEST(Integrate, FullyMaskedLeavesGridUnchanged) {
  VoxelGrid g(0.5, {{-5, -5, 0}, {5, 5, 10}});
  const Intrinsics cam{4, 3, 3.0, 3.0, 2.0, 1.5};
  integrate_depth_map(g, DepthImage{3, 4, std::vector<double>(12, 5.0)}, CameraPose{}, cam,
                      std::vector<std::uint8_t>(12, 0));
  EXPECT_EQ(g.count(CellState::unknown), g.cell_count());
}

TEST(Integrate, TwiceDoublesUpToClamp) {
  const Intrinsics cam{4, 3, 3.0, 3.0, 2.0, 1.5};
  const DepthImage img{3, 4, {3, 4, 5, 6, 3, 4, 5, 6, 7, 8, 9, 2}};
  VoxelGrid once(0.5, {{-5, -5, 0}, {5, 5, 10}});
  integrate_depth_map(once, img, CameraPose{}, cam);
  VoxelGrid twice = once;
  integrate_depth_map(twice, img, CameraPose{}, cam);
  for (std::size_t i = 0; i < once.cell_count(); ++i) {
    EXPECT_DOUBLE_EQ(twice.logodds(i), std::clamp(2.0 * once.logodds(i), -3.5, 3.5));
  }
}

TEST(Integrate, DisjointRaysCommute) {
  const Intrinsics cam{2, 1, 1.0, 1.0, 1.0, 0.5};
  VoxelGrid a(0.5, {{-5, -5, 0}, {5, 5, 10}});
  VoxelGrid b = a;
  const DepthImage left{1, 2, {4.0, NAN}};
  const DepthImage right{1, 2, {NAN, 6.0}};
  integrate_depth_map(a, left, CameraPose{}, cam);
  integrate_depth_map(a, right, CameraPose{}, cam);
  integrate_depth_map(b, right, CameraPose{}, cam);
  integrate_depth_map(b, left, CameraPose{}, cam);
  for (std::size_t i = 0; i < a.cell_count(); ++i) EXPECT_EQ(a.logodds(i), b.logodds(i));
}

TEST(Integrate, ShapeErrors) {
  VoxelGrid g(0.5, {{-5, -5, 0}, {5, 5, 10}});
  const Intrinsics cam{4, 3, 3.0, 3.0, 2.0, 1.5};
  EXPECT_THROW(integrate_depth_map(g, DepthImage{2, 4, std::vector<double>(8, 1.0)}, CameraPose{}, cam),
               ValidationError);
  EXPECT_THROW(integrate_depth_map(g, DepthImage{3, 4, std::vector<double>(12, 1.0)}, CameraPose{}, cam,
                                   std::vector<std::uint8_t>(5, 1)),
               ValidationError);
}

TEST(ConfidenceMask, Examples) {
  EXPECT_EQ(confidence_mask(std::vector<double>{0.5, 0.1, 0.9}, 1.0), (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(confidence_mask(std::vector<double>{0.1, 2.0}, 0.5), (std::vector<std::uint8_t>{1, 0}));
  EXPECT_EQ(confidence_mask(std::vector<double>{0.3, 0.3, 0.3}, 0.67), (std::vector<std::uint8_t>{1, 1, 0}));
  EXPECT_THROW(confidence_mask(std::vector<double>{0.1}, 0.0), ValidationError);
  EXPECT_THROW(confidence_mask(std::vector<double>{0.1}, 1.1), ValidationError);

  const std::vector<DepthDistribution> d{DepthDistribution(std::vector<double>{0.5, 0.5}),
                                         DepthDistribution(std::vector<double>{1.0, 0.0})};
  EXPECT_EQ(confidence_mask(d, 0.5), (std::vector<std::uint8_t>{0, 1}));
}

TEST(ConfidenceMask, NestedAndExactCount) {
  Rng rng(8);
  std::vector<double> u(1000);
  for (double& x : u) x = std::floor(rng.uniform() * 50);  // plenty of ties
  const auto m60 = confidence_mask(u, 0.6);
  const auto m80 = confidence_mask(u, 0.8);
  const auto m100 = confidence_mask(u, 1.0);
  std::size_t n60 = 0;
  std::size_t n80 = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_LE(m60[i], m80[i]);
    EXPECT_LE(m80[i], m100[i]);
    n60 += m60[i];
    n80 += m80[i];
  }
  EXPECT_EQ(n60, 600u);
  EXPECT_EQ(n80, 800u);
}

TEST(MapAccuracy, IdenticalAndInverted) {
  VoxelGrid truth(1.0, {{0, 0, 0}, {3, 3, 3}});
  Rng rng(1);
  for (std::size_t i = 0; i < truth.cell_count(); ++i) truth.set(i, rng.bernoulli(0.3) ? 3.5 : -3.5);
  EXPECT_DOUBLE_EQ(map_accuracy(truth, truth).percent, 100.0);
  VoxelGrid inverted = truth;
  for (std::size_t i = 0; i < truth.cell_count(); ++i) inverted.set(i, -truth.logodds(i));
  EXPECT_DOUBLE_EQ(map_accuracy(inverted, truth).percent, 0.0);
}

TEST(MapAccuracy, MatchesBruteForceOnSmallGrids) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    VoxelGrid truth(1.0, {{0, 0, 0}, {4, 4, 4}});
    VoxelGrid map = truth;
    for (std::size_t i = 0; i < truth.cell_count(); ++i) {
      truth.set(i, rng.bernoulli(0.4) ? 3.5 : -3.5);
      const double r = rng.uniform();
      map.set(i, r < 0.3 ? 0.0 : (r < 0.65 ? 0.85 : -0.4));
    }
    map.set(0, 0.85);
    std::size_t observed = 0;
    std::size_t correct = 0;
    std::size_t occupied = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      const double l = map.logodds(i);
      if (l == 0.0) continue;
      ++observed;
      occupied += l > 0;
      correct += (l > 0) == (truth.logodds(i) > 0);
    }
    const auto acc = map_accuracy(map, truth);
    EXPECT_EQ(acc.observed, observed);
    EXPECT_EQ(acc.correct, correct);
    EXPECT_EQ(acc.occupied, occupied);
    EXPECT_DOUBLE_EQ(acc.percent, 100.0 * correct / observed);
  }
}

TEST(MapAccuracy, Errors) {
  const VoxelGrid a(1.0, {{0, 0, 0}, {3, 3, 3}});
  const VoxelGrid b(0.5, {{0, 0, 0}, {3, 3, 3}});
  EXPECT_THROW(map_accuracy(a, b), ValidationError);
  EXPECT_THROW(map_accuracy(a, a), ValidationError);  // nothing observed
}

TEST(MemoryEstimate, Examples) {
  VoxelGrid g(1.0, {{0, 0, 0}, {10, 10, 10}});
  const MemoryModel mm;
  EXPECT_EQ(memory_estimate(g), mm.fixed_bytes);
  // a fully observed map has no frontier; ten occupied cells cost ten units
  for (std::size_t i = 0; i < g.cell_count(); ++i) g.set(i, -1.0);
  for (std::size_t i = 0; i < 10; ++i) g.set(i * 7, 1.0);
  EXPECT_EQ(memory_estimate(g), mm.fixed_bytes + 10 * mm.cell_bytes);
}

TEST(MemoryEstimate, MonotoneInOccupancy) {
  Rng rng(4);
  VoxelGrid g(1.0, {{0, 0, 0}, {6, 6, 6}});
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double r = rng.uniform();
    g.set(i, r < 0.3 ? 0.0 : (r < 0.5 ? 1.0 : -1.0));
  }
  std::size_t prev = memory_estimate(g);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    if (g.state(i) != CellState::free) continue;
    g.set(i, 1.0);  // superset occupancy over the same observed cells
    const std::size_t now = memory_estimate(g);
    EXPECT_GE(now, prev);
    prev = now;
  }
}
