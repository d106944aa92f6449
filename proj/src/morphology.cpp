#include "cseg/morphology.hpp"

#include <algorithm>

namespace cseg {

namespace {

// Horizontal run of active cells on one element row, relative to the anchor.
struct Run {
  int di;
  int lo;
  int hi;
};

std::vector<Run> runs_of(const StructuringElement& element) {
  std::vector<Run> runs;
  for (int r = 0; r < element.height(); ++r) {
    int c = 0;
    while (c < element.width()) {
      if (!element.active(r, c)) {
        ++c;
        continue;
      }
      int end = c;
      while (end + 1 < element.width() && element.active(r, end + 1)) ++end;
      runs.push_back({r - element.anchor_row(), c - element.anchor_col(), end - element.anchor_col()});
      c = end + 1;
    }
  }
  return runs;
}

// prefix[i * (W + 1) + j] = number of ones in row i, columns [0, j).
std::vector<int> row_prefix(const BinaryMask& mask) {
  const int h = mask.height();
  const int w = mask.width();
  std::vector<int> prefix(static_cast<std::size_t>(h) * (w + 1), 0);
  for (int i = 0; i < h; ++i) {
    int* row = prefix.data() + static_cast<std::size_t>(i) * (w + 1);
    for (int j = 0; j < w; ++j) row[j + 1] = row[j] + (mask(i, j) != 0);
  }
  return prefix;
}

}  // namespace

StructuringElement::StructuringElement(int height, int width, std::vector<bool> active,
                                       std::vector<Offset> offsets)
    : height_(height), width_(width), active_(std::move(active)), offsets_(std::move(offsets)) {}

StructuringElement StructuringElement::from_mask(int height, int width,
                                                 const std::vector<bool>& active) {
  if (height < 1 || width < 1) fail(ErrorCategory::kInvalidArgument, "element extent must be positive");
  if (active.size() != static_cast<std::size_t>(height) * width) {
    fail(ErrorCategory::kDimension, "element mask does not match its extent");
  }
  const int ar = height / 2;
  const int ac = width / 2;
  if (!active[static_cast<std::size_t>(ar) * width + ac]) {
    fail(ErrorCategory::kInvalidArgument, "element anchor must be active");
  }
  std::vector<Offset> offsets;
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      if (active[static_cast<std::size_t>(r) * width + c]) offsets.push_back({r - ar, c - ac});
  return StructuringElement(height, width, active, std::move(offsets));
}

StructuringElement StructuringElement::rectangle(int height, int width) {
  if (height < 1 || width < 1) fail(ErrorCategory::kInvalidArgument, "element extent must be positive");
  return from_mask(height, width, std::vector<bool>(static_cast<std::size_t>(height) * width, true));
}

StructuringElement StructuringElement::ellipse(int height, int width) {
  if (height < 1 || width < 1) fail(ErrorCategory::kInvalidArgument, "element extent must be positive");
  const double ry = (height - 1) / 2.0;
  const double rx = (width - 1) / 2.0;
  const int ar = height / 2;
  const int ac = width / 2;
  std::vector<bool> active(static_cast<std::size_t>(height) * width, false);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double y = ry > 0 ? (r - ar) / ry : 0.0;
      const double x = rx > 0 ? (c - ac) / rx : 0.0;
      active[static_cast<std::size_t>(r) * width + c] = y * y + x * x <= 1.0;
    }
  }
  return from_mask(height, width, active);
}

StructuringElement StructuringElement::reflected() const {
  // Reflect inside a box large enough to keep the anchor centred.
  int reach_r = 0;
  int reach_c = 0;
  for (const auto& o : offsets_) {
    reach_r = std::max(reach_r, std::abs(o.di));
    reach_c = std::max(reach_c, std::abs(o.dj));
  }
  const int h = 2 * reach_r + 1;
  const int w = 2 * reach_c + 1;
  std::vector<bool> active(static_cast<std::size_t>(h) * w, false);
  for (const auto& o : offsets_) {
    active[static_cast<std::size_t>(reach_r - o.di) * w + (reach_c - o.dj)] = true;
  }
  return from_mask(h, w, active);
}

BinaryMask erode(const BinaryMask& mask, const StructuringElement& element) {
  const int h = mask.height();
  const int w = mask.width();
  const auto prefix = row_prefix(mask);
  const auto runs = runs_of(element);
  BinaryMask out(h, w, 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      bool keep = true;
      for (const auto& run : runs) {
        const int r = i + run.di;
        const int lo = j + run.lo;
        const int hi = j + run.hi;
        if (r < 0 || r >= h || lo < 0 || hi >= w) {
          keep = false;
          break;
        }
        const int* row = prefix.data() + static_cast<std::size_t>(r) * (w + 1);
        if (row[hi + 1] - row[lo] != hi - lo + 1) {
          keep = false;
          break;
        }
      }
      out(i, j) = keep ? 1 : 0;
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& element) {
  const int h = mask.height();
  const int w = mask.width();
  const auto prefix = row_prefix(mask);
  const auto runs = runs_of(element);
  BinaryMask out(h, w, 0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (const auto& run : runs) {
        // Reflected run: rows i - di, columns [j - hi, j - lo].
        const int r = i - run.di;
        if (r < 0 || r >= h) continue;
        const int lo = std::max(0, j - run.hi);
        const int hi = std::min(w - 1, j - run.lo);
        if (lo > hi) continue;
        const int* row = prefix.data() + static_cast<std::size_t>(r) * (w + 1);
        if (row[hi + 1] - row[lo] > 0) {
          out(i, j) = 1;
          break;
        }
      }
    }
  }
  return out;
}

BinaryMask refine_residual(const BinaryMask& residual, const RefineKernels& kernels) {
  const auto rect = StructuringElement::rectangle(kernels.erode_height, kernels.erode_width);
  const auto disc = StructuringElement::ellipse(kernels.dilate_size, kernels.dilate_size);
  return dilate(erode(erode(residual, rect), rect), disc);
}

}  // namespace cseg
