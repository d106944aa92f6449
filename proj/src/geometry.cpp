#include "cseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <ostream>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace cseg {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double read_real(std::istream& in, const char* what) {
  double v = 0.0;
  if (!(in >> v)) fail(ErrorCategory::kFormat, std::string("pose file: missing ") + what);
  if (!std::isfinite(v)) fail(ErrorCategory::kFormat, std::string("pose file: non-finite ") + what);
  return v;
}

}  // namespace

void Pose::validate(bool rigid) const {
  if (!intrinsics.allFinite() || !extrinsics.allFinite()) {
    fail(ErrorCategory::kNonFinite, "pose holds non-finite entries");
  }
  if (std::abs(intrinsics.determinant()) < 1e-12) {
    fail(ErrorCategory::kDegenerate, "intrinsics are singular");
  }
  if (rigid) {
    const double det = extrinsics.leftCols<3>().determinant();
    if (std::abs(det - 1.0) > 1e-6) fail(ErrorCategory::kDegenerate, "rotation block is not proper");
  }
}

void ContourShape::validate() const {
  if (vertices.size() != kContourVertexCount) {
    fail(ErrorCategory::kDimension, "contour shape needs exactly 64 vertices");
  }
  for (const auto& v : vertices) {
    if (!v.allFinite()) fail(ErrorCategory::kNonFinite, "contour vertex is not finite");
  }
}

PoseFile read_pose_file(std::istream& in) {
  PoseFile file;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) file.pose.extrinsics(r, c) = read_real(in, "extrinsics");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) file.pose.intrinsics(r, c) = read_real(in, "intrinsics");
  file.shape.vertices.resize(kContourVertexCount);
  for (auto& v : file.shape.vertices) {
    for (int k = 0; k < 3; ++k) v[k] = read_real(in, "vertex");
  }
  double extra = 0.0;
  if (in >> extra) fail(ErrorCategory::kFormat, "pose file: trailing values");
  file.pose.validate(false);
  file.shape.validate();
  return file;
}

PoseFile load_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  return read_pose_file(in);
}

void write_pose_file(std::ostream& out, const PoseFile& file) {
  out << std::setprecision(17);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) out << file.pose.extrinsics(r, c) << (c == 3 ? '\n' : ' ');
  }
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << file.pose.intrinsics(r, c) << (c == 2 ? '\n' : ' ');
  }
  for (const auto& v : file.shape.vertices) out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
}

std::vector<Point2> project_points(const Pose& pose, std::span<const Eigen::Vector3d> points) {
  const Eigen::Matrix<double, 3, 4> camera = pose.intrinsics * pose.extrinsics;
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& x : points) {
    const Eigen::Vector3d uvw = camera * x.homogeneous();
    if (!(uvw.z() >= 1e-9)) {
      fail(ErrorCategory::kDegenerate, "point projects with non-positive depth");
    }
    out.push_back({uvw.x() / uvw.z(), uvw.y() / uvw.z()});
  }
  return out;
}

std::vector<Point2> project_points(const Pose& pose, const ContourShape& shape) {
  shape.validate();
  return project_points(pose, std::span<const Eigen::Vector3d>(shape.vertices));
}

bool Hull2D::contains(const Point2& p) const {
  return std::all_of(edges.begin(), edges.end(), [&](const HalfPlane& e) { return e.contains(p); });
}

Hull2D convex_hull(std::span<const Point2> points) {
  std::vector<Point2> pts(points.begin(), points.end());
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorCategory::kNonFinite, "hull input is not finite");
    }
  }
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) fail(ErrorCategory::kDegenerate, "convex hull needs three distinct points");

  std::vector<Point2> chain(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(chain[k - 2], chain[k - 1], p) <= 0.0) --k;
    chain[k++] = p;
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(chain[k - 2], chain[k - 1], pts[i]) <= 0.0) --k;
    chain[k++] = pts[i];
  }
  chain.resize(k - 1);
  if (chain.size() < 3) fail(ErrorCategory::kDegenerate, "convex hull input is collinear");

  Hull2D hull;
  hull.vertices = std::move(chain);
  const std::size_t n = hull.vertices.size();
  hull.edges.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    hull.edges.push_back({hull.vertices[i], hull.vertices[(i + 1) % n]});
  }
  return hull;
}

BinaryMask rasterize_hull(const Hull2D& hull, int height, int width) {
  if (height < 1 || width < 1) fail(ErrorCategory::kDimension, "raster extent must be positive");
  BinaryMask mask(height, width, 0);
  for (int i = 0; i < height; ++i) {
    const double y = i + 0.5;
    // Clip the scanline against every half-plane to get a candidate span,
    // then settle the span ends with the exact predicate.
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty = false;
    for (const auto& e : hull.edges) {
      const double dx = e.to.x - e.from.x;
      const double dy = e.to.y - e.from.y;
      // side(x) = dx*(y - fy) - dy*(x - fx) >= 0
      const double offset = dx * (y - e.from.y);
      if (dy == 0.0) {
        if (offset < 0.0) empty = true;
      } else if (dy > 0.0) {
        hi = std::min(hi, e.from.x + offset / dy);
      } else {
        lo = std::max(lo, e.from.x + offset / dy);
      }
    }
    if (empty || lo > hi + 1.0) continue;
    const double span_lo = std::clamp(lo, -2.0, width + 2.0);
    const double span_hi = std::clamp(hi, -2.0, width + 2.0);
    const int first = std::max(0, static_cast<int>(std::floor(span_lo - 0.5)) - 1);
    const int last = std::min(width - 1, static_cast<int>(std::ceil(span_hi - 0.5)) + 1);
    for (int j = first; j <= last; ++j) {
      if (hull.contains({j + 0.5, y})) mask(i, j) = 1;
    }
  }
  return mask;
}

BinaryMask full_face_mask(const PoseFile& file, int height, int width) {
  const auto projected = project_points(file.pose, file.shape);
  return rasterize_hull(convex_hull(projected), height, width);
}

}  // namespace cseg
