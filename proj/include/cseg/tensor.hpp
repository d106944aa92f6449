#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cseg/error.hpp"

namespace cseg {

// Dense row-major array of doubles. Holds images (3xHxW), activations,
// logits (KxHxW) and probabilities.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-3 accessors, (channel, row, col).
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * dims_[1] + i) * dims_[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * dims_[1] + i) * dims_[2] + j];
  }

  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

// Dense HxW grid of small integers: binary masks, label maps, blob ids.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height < 0 || width < 0) fail(ErrorCategory::kDimension, "negative grid extent");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const auto& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }
  bool contains(int i, int j) const noexcept {
    return i >= 0 && j >= 0 && i < height_ && j < width_;
  }

  T& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * width_ + j]; }
  const T& operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * width_ + j];
  }
  T& operator[](std::size_t k) { return data_[k]; }
  const T& operator[](std::size_t k) const { return data_[k]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using BinaryMask = Grid<std::uint8_t>;
using LabelMap = Grid<int>;

// Channel-wise softmax of a KxHxW logit tensor, with per-pixel max
// subtraction. Requires K >= 2.
Tensor softmax_channels(const Tensor& logits);

// Per-pixel argmax over channels; ties go to the smallest class index.
LabelMap hard_predict(const Tensor& probs);

// Binary tensor format: "CSEG", version 0x01, u8 rank, rank x u32 LE dims,
// then row-major LE float64 payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Integer grids travel through the same format as rank-2 HxW tensors whose
// values are exactly representable.
Tensor grid_to_tensor(const Grid<int>& grid);
Grid<int> tensor_to_grid(const Tensor& t);

}  // namespace cseg
