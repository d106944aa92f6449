#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cseg/geometry.hpp"
#include "cseg/rng.hpp"
#include "oracles.hpp"

using namespace cseg;

namespace {

std::vector<Point2> random_points(std::mt19937_64& rng, int n, double lo, double hi) {
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.push_back({uniform(rng, lo, hi), uniform(rng, lo, hi)});
  return pts;
}

std::vector<Point2> sorted(std::vector<Point2> v) {
  std::sort(v.begin(), v.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  return v;
}

}  // namespace

TEST(Projection, IdentityCamera) {
  Pose pose;
  const std::vector<Eigen::Vector3d> pts{{0, 0, 1}, {2, 4, 2}};
  const auto out = project_points(pose, pts);
  EXPECT_EQ(out[0], (Point2{0, 0}));
  EXPECT_EQ(out[1], (Point2{1, 2}));
}

TEST(Projection, BehindCameraIsDegenerate) {
  Pose pose;
  const std::vector<Eigen::Vector3d> pts{{0, 0, -1}};
  try {
    project_points(pose, pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kDegenerate);
  }
  const std::vector<Eigen::Vector3d> flat{{1, 1, 0}};
  EXPECT_THROW(project_points(pose, flat), Error);
}

TEST(Projection, EquivariantToIntrinsicScaling) {
  std::mt19937_64 rng(21);
  Pose pose;
  pose.intrinsics << 300, 0, 64, 0, 310, 60, 0, 0, 1;
  pose.extrinsics.col(3) << 0.1, -0.2, 5.0;
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 64; ++i) pts.emplace_back(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  const auto base = project_points(pose, pts);
  for (double lambda : {0.5, 2.0, 3.7}) {
    Pose scaled = pose;
    scaled.intrinsics.topRows<2>() *= lambda;
    const auto out = project_points(scaled, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_NEAR(out[i].x, lambda * base[i].x, 1e-9 * std::max(1.0, std::abs(out[i].x)));
      EXPECT_NEAR(out[i].y, lambda * base[i].y, 1e-9 * std::max(1.0, std::abs(out[i].y)));
    }
  }
}

TEST(Pose, RigidValidation) {
  Pose pose;
  EXPECT_NO_THROW(pose.validate(true));
  pose.extrinsics(0, 0) = -1.0;  // reflection
  EXPECT_THROW(pose.validate(true), Error);
  EXPECT_NO_THROW(pose.validate(false));
  pose.intrinsics.setZero();
  EXPECT_THROW(pose.validate(false), Error);
}

TEST(PoseFileFormat, RoundTrip) {
  PoseFile file;
  file.pose.intrinsics << 100, 0, 32, 0, 100, 32, 0, 0, 1;
  file.pose.extrinsics.col(3) << 0, 0, 4;
  for (std::size_t i = 0; i < kContourVertexCount; ++i) file.shape.vertices.emplace_back(0.01 * i, -0.5, 0.25);
  std::stringstream buf;
  write_pose_file(buf, file);
  const PoseFile back = read_pose_file(buf);
  EXPECT_EQ(back.pose.intrinsics, file.pose.intrinsics);
  EXPECT_EQ(back.pose.extrinsics, file.pose.extrinsics);
  EXPECT_EQ(back.shape.vertices, file.shape.vertices);
}

TEST(PoseFileFormat, WrongVertexCountRejected) {
  std::stringstream short_file;
  for (int i = 0; i < 21 + 63 * 3; ++i) short_file << "1 ";
  EXPECT_THROW(read_pose_file(short_file), Error);
  std::stringstream long_file;
  for (int i = 0; i < 21 + 65 * 3; ++i) long_file << "1 ";
  EXPECT_THROW(read_pose_file(long_file), Error);
}

TEST(Hull, SquareDropsInteriorPoint) {
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const Hull2D hull = convex_hull(pts);
  EXPECT_EQ(hull.vertices.size(), 4u);
  EXPECT_EQ(sorted(hull.vertices), sorted({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
}

TEST(Hull, TriangleIsItself) {
  const std::vector<Point2> pts{{0, 0}, {4, 1}, {1, 3}};
  const Hull2D hull = convex_hull(pts);
  EXPECT_EQ(sorted(hull.vertices), sorted(pts));
}

TEST(Hull, DegenerateInputs) {
  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  try {
    convex_hull(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kDegenerate);
  }
  const std::vector<Point2> two{{0, 0}, {1, 0}, {0, 0}};
  EXPECT_THROW(convex_hull(two), Error);
}

TEST(Hull, StrictlyConvexCounterClockwise) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Hull2D hull = convex_hull(random_points(rng, 40, -10, 10));
    const std::size_t n = hull.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(hull.edges[i].side(hull.vertices[(i + 2) % n]), 0.0);
      EXPECT_FALSE(hull.vertices[i] == hull.vertices[(i + 1) % n]);
    }
  }
}

TEST(Hull, MatchesBruteForceOnRandomPoints) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = random_points(rng, 100, 0, 50);
    // a few exact duplicates and collinear points on an axis-aligned segment
    pts.push_back(pts[3]);
    pts.push_back({-5, 10});
    pts.push_back({-5, 20});
    pts.push_back({-5, 30});
    const Hull2D hull = convex_hull(pts);
    EXPECT_EQ(sorted(hull.vertices), oracle::brute_force_hull_vertices(pts));
    for (const auto& p : pts) EXPECT_TRUE(hull.contains(p));
  }
}

TEST(Raster, CoveringHullFillsImage) {
  const std::vector<Point2> pts{{-10, -10}, {30, -10}, {30, 30}, {-10, 30}};
  const BinaryMask m = rasterize_hull(convex_hull(pts), 12, 17);
  for (auto v : m.values()) EXPECT_EQ(v, 1);
}

TEST(Raster, OutsideHullIsEmpty) {
  const std::vector<Point2> pts{{100, 100}, {130, 100}, {130, 130}};
  const BinaryMask m = rasterize_hull(convex_hull(pts), 12, 17);
  for (auto v : m.values()) EXPECT_EQ(v, 0);
  const std::vector<Point2> far{{1e12, -1e12}, {2e12, -1e12}, {2e12, -3e12}};
  const BinaryMask n = rasterize_hull(convex_hull(far), 5, 5);
  for (auto v : n.values()) EXPECT_EQ(v, 0);
}

TEST(Raster, SquareWithContinuousCorners) {
  const std::vector<Point2> pts{{2, 2}, {6, 2}, {6, 6}, {2, 6}};
  const Hull2D hull = convex_hull(pts);
  const BinaryMask m = rasterize_hull(hull, 9, 9);
  int ones = 0;
  for (auto v : m.values()) ones += v;
  // centres 2.5 .. 5.5 in both axes -> 4x4, none on the boundary
  EXPECT_EQ(m, oracle::per_pixel_raster(hull.vertices, 9, 9));
  EXPECT_EQ(ones, 16);
}

TEST(Raster, SquareOnPixelCornersTwoToSix) {
  // corners at pixels (2,2) and (6,6), i.e. on their centres; boundary
  // pixels count as inside -> 5x5
  const std::vector<Point2> pts{{2.5, 2.5}, {6.5, 2.5}, {6.5, 6.5}, {2.5, 6.5}};
  const Hull2D hull = convex_hull(pts);
  const BinaryMask m = rasterize_hull(hull, 9, 9);
  int ones = 0;
  for (auto v : m.values()) ones += v;
  EXPECT_EQ(ones, 25);
  EXPECT_EQ(m, oracle::per_pixel_raster(hull.vertices, 9, 9));
}

TEST(Raster, MatchesPerPixelOracleAndRowsAreContiguous) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = uniform_int(rng, 3, 30);
    const Hull2D hull = convex_hull(random_points(rng, n, -5, 45));
    const BinaryMask m = rasterize_hull(hull, 40, 37);
    ASSERT_EQ(m, oracle::per_pixel_raster(hull.vertices, 40, 37));
    for (int i = 0; i < m.height(); ++i) {
      int runs = 0;
      for (int j = 0; j < m.width(); ++j)
        if (m(i, j) == 1 && (j == 0 || m(i, j - 1) == 0)) ++runs;
      EXPECT_LE(runs, 1);
    }
  }
}

TEST(Raster, RejectsEmptyExtent) {
  const std::vector<Point2> pts{{0, 0}, {1, 0}, {0, 1}};
  EXPECT_THROW(rasterize_hull(convex_hull(pts), 0, 4), Error);
}

TEST(FullFaceMask, ProjectedContour) {
  PoseFile file;
  file.pose.intrinsics << 40, 0, 16, 0, 40, 16, 0, 0, 1;
  file.pose.extrinsics.col(3) << 0, 0, 4;
  for (std::size_t i = 0; i < kContourVertexCount; ++i) {
    const double t = 2.0 * 3.14159265358979 * static_cast<double>(i) / kContourVertexCount;
    file.shape.vertices.emplace_back(std::cos(t), 1.3 * std::sin(t), 0.0);
  }
  const BinaryMask m = full_face_mask(file, 32, 32);
  const auto projected = project_points(file.pose, file.shape);
  const Hull2D hull = convex_hull(projected);
  EXPECT_EQ(m, oracle::per_pixel_raster(hull.vertices, 32, 32));
  EXPECT_EQ(m(16, 16), 1);
  EXPECT_EQ(m(0, 0), 0);
}
