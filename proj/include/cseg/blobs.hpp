#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cseg/tensor.hpp"

namespace cseg {

// Semantic classes of the three-class face problem.
enum FaceClass : int { kBackground = 0, kFace = 1, kOcclusion = 2 };

// Per-pixel blob ids in {0..max_id}. Ids may be absent (an unoccluded face
// has no ids >= 2; an image filled by the face has no id 0).
struct BlobMap {
  Grid<int> ids;
  int max_id = 0;

  int height() const noexcept { return ids.height(); }
  int width() const noexcept { return ids.width(); }
  // Number of ids that own at least one pixel.
  int blob_count() const;
  friend bool operator==(const BlobMap&, const BlobMap&) = default;
};

// max(0, full - seg), i.e. inside the full face but not in the teacher mask.
BinaryMask residual(const BinaryMask& full, const BinaryMask& seg);

// 8-connected labelling. Zeros get id 0; components get 1..n in row-major
// order of their first pixel.
BlobMap connected_components(const BinaryMask& mask);

struct SynthesizedLabels {
  LabelMap labels;
  BlobMap blobs;
};

// Merge the teacher face mask with the residual components:
// c = 0 background, 1 face, 1 + i for the i-th occlusion component; the
// label map follows c (0 -> background, 1 -> face, >= 2 -> occlusion).
SynthesizedLabels synthesize_labels(const BinaryMask& face, const BlobMap& occlusion_components);

// Blobs straight from annotated class masks. Without splitting the blob id
// equals the class id; with splitting every 8-connected component of every
// class is its own blob, numbered from 0 in row-major first-pixel order.
BlobMap blobs_from_labels(const LabelMap& labels, bool split_components);

// Number of 8-connected components of each listed class, summed.
int count_class_components(const LabelMap& labels, std::span<const int> classes);

// Binary PGM (P5, maxval 255).
Grid<int> read_pgm(std::istream& in);
void write_pgm(std::ostream& out, const Grid<int>& values);
Grid<int> load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const Grid<int>& values);

// Masks on disk are 0 / 255; anything >= 128 reads as 1.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask);
LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelMap& labels);

void save_blobs(const std::filesystem::path& path, const BlobMap& blobs);
BlobMap load_blobs(const std::filesystem::path& path);

}  // namespace cseg
