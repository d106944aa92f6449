#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "cseg/tensor.hpp"

namespace cseg {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// Camera model K[R|t].
struct Pose {
  Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
  Eigen::Matrix<double, 3, 4> extrinsics = Eigen::Matrix<double, 3, 4>::Identity();

  // Throws kDegenerate if K is singular or, for a rigid pose, det(R) is not +1.
  void validate(bool rigid) const;
};

inline constexpr std::size_t kContourVertexCount = 64;

// 3D facial outer contour (jawline plus forehead) in model units.
struct ContourShape {
  std::vector<Eigen::Vector3d> vertices;

  void validate() const;
};

struct PoseFile {
  Pose pose;
  ContourShape shape;
};

// Whitespace separated: 12 extrinsic reals (row-major 3x4), 9 intrinsic reals
// (row-major 3x3), then 64x3 vertex coordinates.
PoseFile read_pose_file(std::istream& in);
PoseFile load_pose_file(const std::filesystem::path& path);
void write_pose_file(std::ostream& out, const PoseFile& file);

// Perspective projection, (u/w, v/w) with (u,v,w) = K[R|t](X,1).
// Throws kDegenerate when any w < 1e-9.
std::vector<Point2> project_points(const Pose& pose, std::span<const Eigen::Vector3d> points);
std::vector<Point2> project_points(const Pose& pose, const ContourShape& shape);

// A directed hull edge; points on the left (or on the edge) are inside.
struct HalfPlane {
  Point2 from;
  Point2 to;
  double side(const Point2& p) const {
    return (to.x - from.x) * (p.y - from.y) - (to.y - from.y) * (p.x - from.x);
  }
  bool contains(const Point2& p) const { return side(p) >= 0.0; }
};

struct Hull2D {
  std::vector<Point2> vertices;  // counter-clockwise, strictly convex
  std::vector<HalfPlane> edges;  // edges[k] runs vertices[k] -> vertices[k+1]

  bool contains(const Point2& p) const;
};

// Andrew's monotone chain. Collinear points on the boundary are dropped.
// Throws kDegenerate on fewer than three non-collinear points.
Hull2D convex_hull(std::span<const Point2> points);

// Pixel (i,j) is probed at (j + 0.5, i + 0.5); boundary counts as inside.
BinaryMask rasterize_hull(const Hull2D& hull, int height, int width);

// Full-face mask from a pose and contour: project, hull, rasterize.
BinaryMask full_face_mask(const PoseFile& file, int height, int width);

}  // namespace cseg
