#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "teer/hull.hpp"

namespace teer {
namespace {

std::vector<Eigen::Vector3d> cube_with_interior(std::mt19937_64& rng, int interior) {
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 8; ++i) pts.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < interior; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  std::shuffle(pts.begin(), pts.end(), rng);
  return pts;
}

TEST(Hull, UnitCubeWithInteriorPoints) {
  std::mt19937_64 rng(3);
  EXPECT_NEAR(convex_hull_volume(cube_with_interior(rng, 500)), 1.0, 1e-12);
}

TEST(Hull, Tetrahedron) {
  const std::vector<Eigen::Vector3d> t{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_NEAR(convex_hull_volume(t), 1.0 / 6.0, 1e-15);
}

TEST(Hull, DegenerateInputsHaveZeroVolume) {
  EXPECT_EQ(convex_hull_volume({}), 0.0);
  const std::vector<Eigen::Vector3d> three{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  EXPECT_EQ(convex_hull_volume(three), 0.0);
  std::vector<Eigen::Vector3d> line, plane, same;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 50; ++i) {
    line.emplace_back(i * 0.5, i * 0.25, -i * 1.0);
    plane.emplace_back(u(rng), u(rng), 2.0);
    same.emplace_back(1, 2, 3);
  }
  EXPECT_EQ(convex_hull_volume(line), 0.0);
  EXPECT_EQ(convex_hull_volume(plane), 0.0);
  EXPECT_EQ(convex_hull_volume(same), 0.0);
}

TEST(Hull, DenseSphereApproachesBallVolume) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 4000; ++i) pts.push_back(Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized() * 2.0);
  const double ball = 4.0 / 3.0 * std::numbers::pi * 8.0;
  const double v = convex_hull_volume(pts);
  EXPECT_LT(v, ball);
  EXPECT_GT(v, 0.99 * ball);
}

TEST(Hull, InvariantUnderRigidTransformAndOrder) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int k = 0; k < 20; ++k) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 200; ++i) pts.emplace_back(u(rng), u(rng), u(rng) * 0.1);
    const double v = convex_hull_volume(pts);
    const Eigen::Matrix3d R = oracle::random_rotation(rng);
    const Eigen::Vector3d t(u(rng), u(rng), u(rng));
    std::vector<Eigen::Vector3d> moved;
    for (const auto& p : pts) moved.push_back(R * p + t);
    std::shuffle(moved.begin(), moved.end(), rng);
    EXPECT_NEAR(convex_hull_volume(moved), v, 1e-9 * v);
  }
}

TEST(Hull, GridPointsWithCoplanarFaces) {
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i <= 4; ++i)
    for (int j = 0; j <= 4; ++j)
      for (int k = 0; k <= 4; ++k) pts.emplace_back(i * 0.5, j * 0.25, k);
  EXPECT_NEAR(convex_hull_volume(pts), 2.0 * 1.0 * 4.0, 1e-12);
}

}  // namespace
}  // namespace teer
