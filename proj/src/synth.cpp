#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include "cseg/harness.hpp"
#include "cseg/rng.hpp"

namespace cseg {

namespace {

namespace fs = std::filesystem;

constexpr const char* kSplits[] = {"train", "val", "test"};

// splitmix64 finaliser; gives each split an unrelated stream.
std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Coordinates of p in a frame centred at (cx,cy) and rotated by angle.
std::pair<double, double> local(double px, double py, double cx, double cy, double angle) {
  const double dx = px - cx;
  const double dy = py - cy;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * dx + s * dy, -s * dx + c * dy};
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

bool inside_face(const SceneSpec& s, double px, double py) {
  const auto [u, v] = local(px, py, s.face_cx, s.face_cy, s.face_angle);
  return (u / s.face_rx) * (u / s.face_rx) + (v / s.face_ry) * (v / s.face_ry) <= 1.0;
}

bool inside_occluder(const Occluder& o, double px, double py) {
  switch (o.shape) {
    case OccluderShape::kRectangle: {
      const auto [u, v] = local(px, py, o.cx, o.cy, o.angle);
      return std::abs(u) <= o.half_w && std::abs(v) <= o.half_h;
    }
    case OccluderShape::kEllipse: {
      const auto [u, v] = local(px, py, o.cx, o.cy, o.angle);
      return (u / o.half_w) * (u / o.half_w) + (v / o.half_h) * (v / o.half_h) <= 1.0;
    }
    case OccluderShape::kPolyline: {
      const Point2 p{px, py};
      for (std::size_t k = 0; k + 1 < o.path.size(); ++k) {
        if (segment_distance(p, o.path[k], o.path[k + 1]) <= o.thickness) return true;
      }
      return false;
    }
  }
  return false;
}

std::string index_name(int index, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d_%s", index, suffix);
  return buf;
}

std::map<std::string, std::string> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#') continue;
    if (eq == std::string::npos) fail(ErrorCategory::kFormat, "manifest line without '=': " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

SceneSpec random_scene_spec(std::mt19937_64& rng, int size, int max_occluders, double noise) {
  const double n = size;
  SceneSpec s;
  s.size = size;
  s.noise = noise;
  s.face_cx = n / 2 + uniform(rng, -0.08, 0.08) * n;
  s.face_cy = n / 2 + uniform(rng, -0.08, 0.08) * n;
  s.face_rx = uniform(rng, 0.2, 0.3) * n;
  s.face_ry = uniform(rng, 0.26, 0.36) * n;
  s.face_angle = uniform(rng, -0.35, 0.35);
  const double r = uniform(rng, 0.45, 0.9);
  s.skin = {r, r * uniform(rng, 0.6, 0.8), r * uniform(rng, 0.4, 0.65)};
  s.texture_freq = uniform(rng, 0.3, 0.9);
  s.texture_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (int c = 0; c < 3; ++c) {
    s.background[c] = uniform(rng, 0.05, 0.95);
    s.background_slope[c] = uniform(rng, -0.2, 0.2);
  }
  const int count = uniform_int(rng, 0, max_occluders);
  for (int k = 0; k < count; ++k) {
    Occluder o;
    o.shape = static_cast<OccluderShape>(uniform_int(rng, 0, 2));
    // centre somewhere on the face
    const double rad = 0.85 * std::sqrt(uniform01(rng));
    const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double c = std::cos(s.face_angle);
    const double si = std::sin(s.face_angle);
    const double u = rad * s.face_rx * std::cos(theta);
    const double v = rad * s.face_ry * std::sin(theta);
    o.cx = s.face_cx + c * u - si * v;
    o.cy = s.face_cy + si * u + c * v;
    if (o.shape == OccluderShape::kPolyline) {
      o.path.push_back({o.cx, o.cy});
      for (int step = 0; step < 2; ++step) {
        const double len = uniform(rng, 0.1, 0.25) * n;
        const double dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        const Point2 last = o.path.back();
        o.path.push_back({last.x + len * std::cos(dir), last.y + len * std::sin(dir)});
      }
      o.thickness = uniform(rng, 1.2, 3.0);
    } else if (o.shape == OccluderShape::kRectangle) {
      o.half_w = uniform(rng, 0.06, 0.18) * n;
      o.half_h = uniform(rng, 0.06, 0.18) * n;
      o.angle = uniform(rng, -0.6, 0.6);
    } else {
      o.half_w = uniform(rng, 0.05, 0.15) * n;
      o.half_h = uniform(rng, 0.05, 0.15) * n;
      o.angle = uniform(rng, -0.6, 0.6);
    }
    for (auto& ch : o.color) ch = uniform01(rng);
    o.stripe = uniform(rng, 0.0, 0.15);
    s.occluders.push_back(std::move(o));
  }
  return s;
}

SyntheticScene render_scene(const SceneSpec& spec, std::mt19937_64& rng) {
  const int n = spec.size;
  if (n <= 0) fail(ErrorCategory::kInvalidArgument, "scene size must be positive");
  SyntheticScene out;
  out.image = Tensor({3, static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  BinaryMask face(n, n, 0);
  BinaryMask occluded_face(n, n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double px = j + 0.5;
      const double py = i + 0.5;
      std::array<double, 3> rgb;
      const double ramp = (px + py) / n - 1.0;
      for (int c = 0; c < 3; ++c) rgb[c] = spec.background[c] + spec.background_slope[c] * ramp;
      const bool in_face = inside_face(spec, px, py);
      if (in_face) {
        face(i, j) = 1;
        const double t = 1.0 + 0.08 * std::sin(spec.texture_freq * px + spec.texture_phase) *
                                   std::sin(0.7 * spec.texture_freq * py);
        for (int c = 0; c < 3; ++c) rgb[c] = spec.skin[c] * t;
      }
      // later occluders paint over earlier ones
      for (const Occluder& o : spec.occluders) {
        if (!inside_occluder(o, px, py)) continue;
        const auto [u, v] = local(px, py, o.cx, o.cy, o.angle);
        const double t = o.stripe * std::sin(0.9 * u);
        for (int c = 0; c < 3; ++c) rgb[c] = o.color[c] + t;
        if (in_face) occluded_face(i, j) = 1;
      }
      for (int c = 0; c < 3; ++c) {
        out.image.at(c, i, j) = rgb[c] + spec.noise * normal(rng);
      }
    }
  }
  SynthesizedLabels sl = synthesize_labels(face, connected_components(occluded_face));
  out.labels = std::move(sl.labels);
  out.blobs = std::move(sl.blobs);
  out.superpixels = grid_superpixels(out.blobs, 8);
  return out;
}

SuperpixelMap grid_superpixels(const BlobMap& blobs, int cell) {
  if (cell <= 0) fail(ErrorCategory::kInvalidArgument, "superpixel cell must be positive");
  const int h = blobs.height();
  const int w = blobs.width();
  const int cells_x = (w + cell - 1) / cell;
  SuperpixelMap sp{Grid<int>(h, w, 0), 0};
  std::map<std::int64_t, int> dense;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::int64_t cell_id = static_cast<std::int64_t>(i / cell) * cells_x + j / cell;
      const std::int64_t key = cell_id * (static_cast<std::int64_t>(blobs.max_id) + 1) + blobs.ids(i, j);
      auto [it, fresh] = dense.try_emplace(key, sp.count);
      if (fresh) ++sp.count;
      sp.ids(i, j) = it->second;
    }
  }
  return sp;
}

void synth_generate(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const int counts[] = {cfg.train_count, cfg.val_count, cfg.test_count};
  for (int split = 0; split < 3; ++split) {
    const fs::path sub = dir / kSplits[split];
    fs::create_directories(sub, ec);
    if (ec) fail(ErrorCategory::kIo, "cannot create " + sub.string() + ": " + ec.message());
    std::mt19937_64 rng(mix(cfg.seed, static_cast<std::uint64_t>(split)));
    for (int k = 0; k < counts[split]; ++k) {
      const SceneSpec spec = random_scene_spec(rng, cfg.image_size, cfg.max_occluders, cfg.noise);
      const SyntheticScene scene = render_scene(spec, rng);
      save_tensor(sub / index_name(k, "image.cseg"), scene.image);
      save_labels(sub / index_name(k, "labels.pgm"), scene.labels);
      save_blobs(sub / index_name(k, "blobs.cseg"), scene.blobs);
      save_tensor(sub / index_name(k, "sp.cseg"), grid_to_tensor(scene.superpixels.ids));
    }
  }
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) fail(ErrorCategory::kIo, "cannot write manifest in " + dir.string());
  manifest << "image_size=" << cfg.image_size << '\n'
           << "train_count=" << cfg.train_count << '\n'
           << "val_count=" << cfg.val_count << '\n'
           << "test_count=" << cfg.test_count << '\n'
           << "seed=" << cfg.seed << '\n';
  if (!manifest) fail(ErrorCategory::kIo, "short write on manifest");
}

std::vector<Sample> load_split(const fs::path& dir, std::string_view split) {
  const auto kv = read_manifest(dir / "manifest.txt");
  const auto it = kv.find(std::string(split) + "_count");
  if (it == kv.end()) fail(ErrorCategory::kInvalidArgument, "unknown split '" + std::string(split) + "'");
  int count = 0;
  try {
    count = std::stoi(it->second);
  } catch (const std::exception&) {
    fail(ErrorCategory::kFormat, "bad count in manifest: " + it->second);
  }
  const fs::path sub = dir / std::string(split);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Sample s;
    s.image = load_tensor(sub / index_name(k, "image.cseg"));
    s.labels = load_labels(sub / index_name(k, "labels.pgm"));
    s.blobs = load_blobs(sub / index_name(k, "blobs.cseg"));
    s.superpixels.ids = tensor_to_grid(load_tensor(sub / index_name(k, "sp.cseg")));
    if (s.image.rank() != 3 || s.image.dim(0) != 3 || static_cast<int>(s.image.dim(1)) != s.labels.height() ||
        static_cast<int>(s.image.dim(2)) != s.labels.width() || !s.labels.same_shape(s.blobs.ids) ||
        !s.labels.same_shape(s.superpixels.ids)) {
      fail(ErrorCategory::kDimension, "sample " + std::to_string(k) + " of " + std::string(split) +
                                          " has inconsistent dims");
    }
    for (int v : s.superpixels.ids.values()) s.superpixels.count = std::max(s.superpixels.count, v + 1);
    s.superpixels.validate();
    s.region_labels.assign(static_cast<std::size_t>(s.superpixels.count), -1);
    for (std::size_t p = 0; p < s.labels.size(); ++p) {
      int& r = s.region_labels[static_cast<std::size_t>(s.superpixels.ids[p])];
      if (r < 0) r = s.labels[p];
    }
    out.push_back(std::move(s));
  }
  return out;
}

Sample flipped(const Sample& s) {
  Sample f = s;
  const std::size_t h = s.image.dim(1);
  const std::size_t w = s.image.dim(2);
  for (std::size_t c = 0; c < s.image.dim(0); ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) f.image.at(c, i, j) = s.image.at(c, i, w - 1 - j);
  const int hi = s.labels.height();
  const int wi = s.labels.width();
  for (int i = 0; i < hi; ++i) {
    for (int j = 0; j < wi; ++j) {
      f.labels(i, j) = s.labels(i, wi - 1 - j);
      f.blobs.ids(i, j) = s.blobs.ids(i, wi - 1 - j);
      f.superpixels.ids(i, j) = s.superpixels.ids(i, wi - 1 - j);
    }
  }
  return f;
}

}  // namespace cseg
