#include "cseg/blobs.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

namespace cseg {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Two-pass 8-connected labelling over pixels with key >= 0; neighbours join
// when their keys match. Regions are numbered first_id, first_id + 1, ... in
// row-major order of their first pixel; excluded pixels get `excluded_id`.
Grid<int> label_regions(const Grid<int>& key, int first_id, int excluded_id, int* regions) {
  const int h = key.height();
  const int w = key.width();
  DisjointSets sets(key.size());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int k = key(i, j);
      if (k < 0) continue;
      const std::size_t here = static_cast<std::size_t>(i) * w + j;
      // Already-visited neighbours: W, NW, N, NE.
      constexpr int kNeighbours[4][2] = {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
      for (const auto& d : kNeighbours) {
        const int ni = i + d[0];
        const int nj = j + d[1];
        if (key.contains(ni, nj) && key(ni, nj) == k) {
          sets.unite(here, static_cast<std::size_t>(ni) * w + nj);
        }
      }
    }
  }
  Grid<int> ids(h, w, excluded_id);
  std::vector<int> root_id(key.size(), -1);
  int next = first_id;
  for (std::size_t s = 0; s < key.size(); ++s) {
    if (key[s] < 0) continue;
    const std::size_t root = sets.find(s);
    if (root_id[root] < 0) root_id[root] = next++;
    ids[s] = root_id[root];
  }
  if (regions != nullptr) *regions = next - first_id;
  return ids;
}

void require_binary(const BinaryMask& m) {
  for (auto v : m.values()) {
    if (v > 1) fail(ErrorCategory::kInvalidArgument, "binary mask holds a value other than 0/1");
  }
}

}  // namespace

int BlobMap::blob_count() const {
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (int v : ids.values()) seen.at(static_cast<std::size_t>(v)) = true;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

BinaryMask residual(const BinaryMask& full, const BinaryMask& seg) {
  if (!full.same_shape(seg)) fail(ErrorCategory::kDimension, "residual: mask dims differ");
  require_binary(full);
  require_binary(seg);
  BinaryMask out(full.height(), full.width(), 0);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (full[k] == 1 && seg[k] == 0) ? 1 : 0;
  return out;
}

BlobMap connected_components(const BinaryMask& mask) {
  require_binary(mask);
  Grid<int> key(mask.height(), mask.width(), -1);
  for (std::size_t k = 0; k < mask.size(); ++k) key[k] = mask[k] ? 0 : -1;
  int regions = 0;
  BlobMap out;
  out.ids = label_regions(key, 1, 0, &regions);
  out.max_id = regions;
  return out;
}

SynthesizedLabels synthesize_labels(const BinaryMask& face, const BlobMap& occlusion_components) {
  if (face.height() != occlusion_components.height() || face.width() != occlusion_components.width()) {
    fail(ErrorCategory::kDimension, "synthesize_labels: dims differ");
  }
  require_binary(face);
  const int h = face.height();
  const int w = face.width();
  SynthesizedLabels out{LabelMap(h, w, kBackground), BlobMap{Grid<int>(h, w, 0), 1}};
  int max_component = 0;
  for (std::size_t k = 0; k < face.size(); ++k) {
    const int component = occlusion_components.ids[k];
    if (component < 0) fail(ErrorCategory::kInvalidArgument, "negative component id");
    if (component > 0) {
      out.blobs.ids[k] = 1 + component;
      out.labels[k] = kOcclusion;
      max_component = std::max(max_component, component);
    } else if (face[k] == 1) {
      out.blobs.ids[k] = 1;
      out.labels[k] = kFace;
    }
  }
  out.blobs.max_id = 1 + max_component;
  return out;
}

BlobMap blobs_from_labels(const LabelMap& labels, bool split_components) {
  for (int v : labels.values()) {
    if (v < 0) fail(ErrorCategory::kInvalidArgument, "negative class id");
  }
  BlobMap out;
  if (!split_components) {
    out.ids = labels;
    out.max_id = labels.size() ? *std::max_element(labels.values().begin(), labels.values().end()) : 0;
    return out;
  }
  int regions = 0;
  out.ids = label_regions(labels, 0, 0, &regions);
  out.max_id = std::max(0, regions - 1);
  return out;
}

int count_class_components(const LabelMap& labels, std::span<const int> classes) {
  int total = 0;
  for (int cls : classes) {
    Grid<int> key(labels.height(), labels.width(), -1);
    for (std::size_t k = 0; k < labels.size(); ++k) key[k] = labels[k] == cls ? 0 : -1;
    int regions = 0;
    label_regions(key, 1, 0, &regions);
    total += regions;
  }
  return total;
}

// --- PGM ---------------------------------------------------------------

namespace {

int read_header_int(std::istream& in) {
  // Skip whitespace and '#' comments.
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) fail(ErrorCategory::kFormat, "pgm: malformed header");
  return v;
}

}  // namespace

Grid<int> read_pgm(std::istream& in) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') {
    fail(ErrorCategory::kFormat, "pgm: expected binary P5");
  }
  const int w = read_header_int(in);
  const int h = read_header_int(in);
  const int maxval = read_header_int(in);
  if (w < 1 || h < 1) fail(ErrorCategory::kFormat, "pgm: bad extent");
  if (maxval < 1 || maxval > 255) fail(ErrorCategory::kFormat, "pgm: only 8-bit maps are supported");
  in.get();  // single whitespace after maxval
  Grid<int> out(h, w, 0);
  std::vector<unsigned char> raw(out.size());
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    fail(ErrorCategory::kFormat, "pgm: truncated payload");
  }
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = raw[k];
  return out;
}

void write_pgm(std::ostream& out, const Grid<int>& values) {
  out << "P5\n" << values.width() << ' ' << values.height() << "\n255\n";
  std::vector<char> raw(values.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (values[k] < 0 || values[k] > 255) fail(ErrorCategory::kInvalidArgument, "pgm value out of range");
    raw[k] = static_cast<char>(static_cast<unsigned char>(values[k]));
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) fail(ErrorCategory::kIo, "pgm: write failed");
}

Grid<int> load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  return read_pgm(in);
}

void save_pgm(const std::filesystem::path& path, const Grid<int>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  write_pgm(out, values);
}

BinaryMask load_mask(const std::filesystem::path& path) {
  const auto raw = load_pgm(path);
  BinaryMask mask(raw.height(), raw.width(), 0);
  for (std::size_t k = 0; k < raw.size(); ++k) mask[k] = raw[k] >= 128 ? 1 : 0;
  return mask;
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Grid<int> raw(mask.height(), mask.width(), 0);
  for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = mask[k] ? 255 : 0;
  save_pgm(path, raw);
}

LabelMap load_labels(const std::filesystem::path& path) { return load_pgm(path); }

void save_labels(const std::filesystem::path& path, const LabelMap& labels) { save_pgm(path, labels); }

void save_blobs(const std::filesystem::path& path, const BlobMap& blobs) {
  save_tensor(path, grid_to_tensor(blobs.ids));
}

BlobMap load_blobs(const std::filesystem::path& path) {
  BlobMap out;
  out.ids = tensor_to_grid(load_tensor(path));
  for (int v : out.ids.values()) {
    if (v < 0) fail(ErrorCategory::kFormat, "blob map holds a negative id");
    out.max_id = std::max(out.max_id, v);
  }
  return out;
}

}  // namespace cseg
