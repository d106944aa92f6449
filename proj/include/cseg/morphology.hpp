#pragma once

#include <vector>

#include "cseg/tensor.hpp"

namespace cseg {

struct Offset {
  int di = 0;
  int dj = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

// Binary structuring element on a height x width box, anchored at the
// centre cell (height/2, width/2).
class StructuringElement {
 public:
  static StructuringElement rectangle(int height, int width);
  // Inscribed ellipse: (di/ry)^2 + (dj/rx)^2 <= 1 with ry = (height-1)/2,
  // rx = (width-1)/2. A 45x45 element is the r = 22 disc.
  static StructuringElement ellipse(int height, int width);
  // Arbitrary shape; `active` is row-major height x width.
  static StructuringElement from_mask(int height, int width, const std::vector<bool>& active);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int anchor_row() const noexcept { return height_ / 2; }
  int anchor_col() const noexcept { return width_ / 2; }

  // Active cells relative to the anchor.
  const std::vector<Offset>& offsets() const noexcept { return offsets_; }
  bool active(int row, int col) const { return active_[static_cast<std::size_t>(row) * width_ + col]; }

  // Point reflection through the anchor.
  StructuringElement reflected() const;

 private:
  StructuringElement(int height, int width, std::vector<bool> active, std::vector<Offset> offsets);

  int height_ = 0;
  int width_ = 0;
  std::vector<bool> active_;
  std::vector<Offset> offsets_;
};

// out(s) = 1 iff every active offset anchored at s lands on a 1. Pixels
// outside the image count as 0.
BinaryMask erode(const BinaryMask& mask, const StructuringElement& element);

// out(s) = 1 iff mask(s - d) = 1 for some active offset d.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element);

struct RefineKernels {
  int erode_height = 25;
  int erode_width = 7;
  int dilate_size = 45;
};

// Two erosions with the rectangle, then one dilation with the ellipse.
BinaryMask refine_residual(const BinaryMask& residual, const RefineKernels& kernels = {});

}  // namespace cseg
