#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <variant>
#include <vector>

#include "cseg/descriptor.hpp"
#include "cseg/tensor.hpp"

namespace cseg {

// Each layer caches what its backward pass needs during forward, so a
// forward/backward pair must run on one image at a time.

class ReflectionPad {
 public:
  explicit ReflectionPad(int width) : width_(width) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  int width_;
  std::vector<std::size_t> in_dims_;
};

class Conv2d {
 public:
  Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride, int dilation,
         int zero_pad);
  Tensor forward(const Tensor& x);
  // Accumulates weight/bias gradients; returns dL/dx.
  Tensor backward(const Tensor& grad_out);

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  Tensor& weight_grad() { return weight_grad_; }
  Tensor& bias_grad() { return bias_grad_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  // Glorot-uniform weights, zero bias.
  void initialize(std::mt19937_64& rng);

 private:
  int cin_, cout_, kh_, kw_, stride_, dilation_, pad_;
  Tensor weight_;  // cout x cin x kh x kw
  Tensor bias_;    // cout
  Tensor weight_grad_;
  Tensor bias_grad_;
  // forward cache
  std::vector<std::size_t> in_dims_;
  int out_h_ = 0;
  int out_w_ = 0;
  std::vector<double> columns_;  // (cin*kh*kw) x (out_h*out_w)
};

class Elu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor output_;
};

class PixelShuffle {
 public:
  explicit PixelShuffle(int ratio) : ratio_(ratio) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

  static Tensor shuffle(const Tensor& x, int ratio);
  static Tensor unshuffle(const Tensor& x, int ratio);

 private:
  int ratio_;
};

// Inverted dropout; identity outside training.
class Dropout {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& grad_out) const;

 private:
  double rate_;
  std::mt19937_64 rng_;
  std::vector<double> scale_;
};

using Layer = std::variant<ReflectionPad, Conv2d, Elu, PixelShuffle, Dropout>;

struct ParameterRef {
  Tensor* value;
  Tensor* grad;
};

class Network {
 public:
  // Builds trainable layers from a descriptor; batch norm and concat are
  // rejected. Weights are drawn from `seed`.
  Network(std::vector<LayerSpec> specs, std::uint64_t seed);

  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }

  Tensor forward(const Tensor& input, bool training = false);
  // dL/d(input); parameter gradients are accumulated.
  Tensor backward(const Tensor& grad_output);
  void zero_grad();

  std::vector<ParameterRef> parameters();
  std::size_t parameter_count() const;

  // One file: an index record [count, numel_1, ..., numel_count] followed by
  // one tensor record per parameter, all in the binary tensor format.
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Layer> layers_;
  bool have_cache_ = false;
};

}  // namespace cseg
