#include "cseg/network.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Core>

#include "cseg/rng.hpp"

namespace cseg {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_chw(const Tensor& x, const char* who) {
  if (x.rank() != 3) fail(ErrorCategory::kDimension, std::string(who) + ": expects a CxHxW tensor");
}

int reflect(int idx, int n) {
  if (idx < 0) return -idx;
  if (idx >= n) return 2 * (n - 1) - idx;
  return idx;
}

}  // namespace

// --- ReflectionPad -------------------------------------------------------

Tensor ReflectionPad::forward(const Tensor& x) {
  require_chw(x, "pad");
  const int c = static_cast<int>(x.dim(0));
  const int h = static_cast<int>(x.dim(1));
  const int w = static_cast<int>(x.dim(2));
  if (width_ >= h || width_ >= w) fail(ErrorCategory::kDimension, "pad: reflection wider than input");
  in_dims_ = x.dims();
  const int ho = h + 2 * width_;
  const int wo = w + 2 * width_;
  Tensor out({x.dim(0), static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < ho; ++i) {
      const int si = reflect(i - width_, h);
      for (int j = 0; j < wo; ++j) out.at(ch, i, j) = x.at(ch, si, reflect(j - width_, w));
    }
  return out;
}

Tensor ReflectionPad::backward(const Tensor& grad_out) const {
  if (in_dims_.empty()) fail(ErrorCategory::kInvalidArgument, "pad: backward without forward");
  Tensor dx(in_dims_);
  const int c = static_cast<int>(in_dims_[0]);
  const int h = static_cast<int>(in_dims_[1]);
  const int w = static_cast<int>(in_dims_[2]);
  const int ho = h + 2 * width_;
  const int wo = w + 2 * width_;
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < ho; ++i) {
      const int si = reflect(i - width_, h);
      for (int j = 0; j < wo; ++j) dx.at(ch, si, reflect(j - width_, w)) += grad_out.at(ch, i, j);
    }
  return dx;
}

// --- Conv2d --------------------------------------------------------------

Conv2d::Conv2d(int in_channels, int out_channels, int kernel_h, int kernel_w, int stride,
               int dilation, int zero_pad)
    : cin_(in_channels), cout_(out_channels), kh_(kernel_h), kw_(kernel_w), stride_(stride),
      dilation_(dilation), pad_(zero_pad),
      weight_({static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels),
               static_cast<std::size_t>(kernel_h), static_cast<std::size_t>(kernel_w)}),
      bias_({static_cast<std::size_t>(out_channels)}),
      weight_grad_(weight_.dims()),
      bias_grad_(bias_.dims()) {}

void Conv2d::initialize(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(cin_) * kh_ * kw_;
  const double fan_out = static_cast<double>(cout_) * kh_ * kw_;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : weight_.values()) v = uniform(rng, -limit, limit);
  bias_.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
  require_chw(x, "conv");
  if (x.dim(0) != static_cast<std::size_t>(cin_)) fail(ErrorCategory::kDimension, "conv: channel mismatch");
  const int h = static_cast<int>(x.dim(1));
  const int w = static_cast<int>(x.dim(2));
  const int keff_h = 1 + (kh_ - 1) * dilation_;
  const int keff_w = 1 + (kw_ - 1) * dilation_;
  if (h + 2 * pad_ < keff_h || w + 2 * pad_ < keff_w) {
    fail(ErrorCategory::kDimension, "conv: input smaller than kernel");
  }
  in_dims_ = x.dims();
  out_h_ = (h + 2 * pad_ - keff_h) / stride_ + 1;
  out_w_ = (w + 2 * pad_ - keff_w) / stride_ + 1;
  const int rows = cin_ * kh_ * kw_;
  const int cols = out_h_ * out_w_;
  columns_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  for (int ci = 0; ci < cin_; ++ci)
    for (int a = 0; a < kh_; ++a)
      for (int b = 0; b < kw_; ++b) {
        double* row = columns_.data() + static_cast<std::size_t>((ci * kh_ + a) * kw_ + b) * cols;
        for (int oi = 0; oi < out_h_; ++oi) {
          const int si = oi * stride_ + a * dilation_ - pad_;
          if (si < 0 || si >= h) continue;
          for (int oj = 0; oj < out_w_; ++oj) {
            const int sj = oj * stride_ + b * dilation_ - pad_;
            if (sj >= 0 && sj < w) row[oi * out_w_ + oj] = x.at(ci, si, sj);
          }
        }
      }
  Tensor out({static_cast<std::size_t>(cout_), static_cast<std::size_t>(out_h_),
              static_cast<std::size_t>(out_w_)});
  ConstMatMap wm(weight_.data(), cout_, rows);
  ConstMatMap cm(columns_.data(), rows, cols);
  MatMap om(out.data(), cout_, cols);
  om.noalias() = wm * cm;
  for (int co = 0; co < cout_; ++co) om.row(co).array() += bias_[co];
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (in_dims_.empty()) fail(ErrorCategory::kInvalidArgument, "conv: backward without forward");
  const int rows = cin_ * kh_ * kw_;
  const int cols = out_h_ * out_w_;
  if (grad_out.size() != static_cast<std::size_t>(cout_) * cols) {
    fail(ErrorCategory::kDimension, "conv: upstream gradient has the wrong size");
  }
  ConstMatMap g(grad_out.data(), cout_, cols);
  ConstMatMap cm(columns_.data(), rows, cols);
  ConstMatMap wm(weight_.data(), cout_, rows);
  MatMap dw(weight_grad_.data(), cout_, rows);
  dw.noalias() += g * cm.transpose();
  for (int co = 0; co < cout_; ++co) bias_grad_[co] += g.row(co).sum();

  RowMatrix dcols(rows, cols);
  dcols.noalias() = wm.transpose() * g;
  Tensor dx(in_dims_);
  const int h = static_cast<int>(in_dims_[1]);
  const int w = static_cast<int>(in_dims_[2]);
  for (int ci = 0; ci < cin_; ++ci)
    for (int a = 0; a < kh_; ++a)
      for (int b = 0; b < kw_; ++b) {
        const double* row = dcols.data() + static_cast<std::size_t>((ci * kh_ + a) * kw_ + b) * cols;
        for (int oi = 0; oi < out_h_; ++oi) {
          const int si = oi * stride_ + a * dilation_ - pad_;
          if (si < 0 || si >= h) continue;
          for (int oj = 0; oj < out_w_; ++oj) {
            const int sj = oj * stride_ + b * dilation_ - pad_;
            if (sj >= 0 && sj < w) dx.at(ci, si, sj) += row[oi * out_w_ + oj];
          }
        }
      }
  return dx;
}

// --- Elu -----------------------------------------------------------------

Tensor Elu::forward(const Tensor& x) {
  output_ = x;
  for (auto& v : output_.values()) v = v > 0.0 ? v : std::expm1(v);
  return output_;
}

Tensor Elu::backward(const Tensor& grad_out) const {
  if (output_.empty()) fail(ErrorCategory::kInvalidArgument, "elu: backward without forward");
  Tensor dx = grad_out;
  for (std::size_t k = 0; k < dx.size(); ++k) {
    if (output_[k] <= 0.0) dx[k] *= output_[k] + 1.0;
  }
  return dx;
}

// --- PixelShuffle ----------------------------------------------------------

Tensor PixelShuffle::shuffle(const Tensor& x, int r) {
  require_chw(x, "shuffle");
  const std::size_t r2 = static_cast<std::size_t>(r) * r;
  if (x.dim(0) % r2 != 0) fail(ErrorCategory::kDimension, "shuffle: channels not divisible by ratio^2");
  const std::size_t c = x.dim(0) / r2;
  const std::size_t h = x.dim(1);
  const std::size_t w = x.dim(2);
  Tensor out({c, h * r, w * r});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) {
        const std::size_t src = ch * r2 + static_cast<std::size_t>(a) * r + b;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) out.at(ch, i * r + a, j * r + b) = x.at(src, i, j);
      }
  return out;
}

Tensor PixelShuffle::unshuffle(const Tensor& x, int r) {
  require_chw(x, "unshuffle");
  if (x.dim(1) % r != 0 || x.dim(2) % r != 0) {
    fail(ErrorCategory::kDimension, "unshuffle: extents not divisible by ratio");
  }
  const std::size_t r2 = static_cast<std::size_t>(r) * r;
  const std::size_t c = x.dim(0);
  const std::size_t h = x.dim(1) / r;
  const std::size_t w = x.dim(2) / r;
  Tensor out({c * r2, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) {
        const std::size_t dst = ch * r2 + static_cast<std::size_t>(a) * r + b;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j) out.at(dst, i, j) = x.at(ch, i * r + a, j * r + b);
      }
  return out;
}

Tensor PixelShuffle::forward(const Tensor& x) { return shuffle(x, ratio_); }

Tensor PixelShuffle::backward(const Tensor& grad_out) const { return unshuffle(grad_out, ratio_); }

// --- Dropout ---------------------------------------------------------------

Tensor Dropout::forward(const Tensor& x, bool training) {
  scale_.assign(x.size(), 1.0);
  if (!training || rate_ <= 0.0) return x;
  Tensor out = x;
  const double keep = 1.0 / (1.0 - rate_);
  for (std::size_t k = 0; k < x.size(); ++k) {
    scale_[k] = uniform01(rng_) < rate_ ? 0.0 : keep;
    out[k] *= scale_[k];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) const {
  if (scale_.size() != grad_out.size()) fail(ErrorCategory::kInvalidArgument, "dropout: backward without forward");
  Tensor dx = grad_out;
  for (std::size_t k = 0; k < dx.size(); ++k) dx[k] *= scale_[k];
  return dx;
}

// --- Network -------------------------------------------------------------

Network::Network(std::vector<LayerSpec> specs, std::uint64_t seed) : specs_(std::move(specs)) {
  std::mt19937_64 rng(seed);
  for (const auto& s : specs_) {
    s.validate();
    switch (s.kind) {
      case LayerKind::kPad:
        layers_.emplace_back(ReflectionPad(s.extra));
        break;
      case LayerKind::kConv:
      case LayerKind::kClassifier: {
        Conv2d conv(s.in_channels, s.out_channels, s.kernel_h, s.kernel_w, s.stride, s.dilation, s.extra);
        conv.initialize(rng);
        layers_.emplace_back(std::move(conv));
        break;
      }
      case LayerKind::kElu:
        layers_.emplace_back(Elu());
        break;
      case LayerKind::kShuffle:
        layers_.emplace_back(PixelShuffle(s.ratio));
        break;
      case LayerKind::kDropout:
        layers_.emplace_back(Dropout(s.extra / 100.0, rng()));
        break;
      case LayerKind::kBatchNorm:
      case LayerKind::kConcat:
        fail(ErrorCategory::kInvalidArgument,
             std::string(kind_name(s.kind)) + " layers are descriptor-only");
    }
  }
}

Tensor Network::forward(const Tensor& input, bool training) {
  Tensor x = input;
  for (auto& layer : layers_) {
    x = std::visit(
        [&](auto& l) -> Tensor {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Dropout>) {
            return l.forward(x, training);
          } else {
            return l.forward(x);
          }
        },
        layer);
  }
  have_cache_ = true;
  return x;
}

Tensor Network::backward(const Tensor& grad_output) {
  if (!have_cache_) fail(ErrorCategory::kInvalidArgument, "backward called before forward");
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = std::visit([&](auto& l) -> Tensor { return l.backward(g); }, *it);
  }
  return g;
}

void Network::zero_grad() {
  for (auto p : parameters()) p.grad->fill(0.0);
}

std::vector<ParameterRef> Network::parameters() {
  std::vector<ParameterRef> out;
  for (auto& layer : layers_) {
    if (auto* conv = std::get_if<Conv2d>(&layer)) {
      out.push_back({&conv->weight(), &conv->weight_grad()});
      out.push_back({&conv->bias(), &conv->bias_grad()});
    }
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    if (const auto* conv = std::get_if<Conv2d>(&layer)) total += conv->weight().size() + conv->bias().size();
  }
  return total;
}

void Network::save(const std::filesystem::path& path) const {
  std::vector<const Tensor*> tensors;
  for (const auto& layer : layers_) {
    if (const auto* conv = std::get_if<Conv2d>(&layer)) {
      tensors.push_back(&conv->weight());
      tensors.push_back(&conv->bias());
    }
  }
  Tensor index({tensors.size() + 1});
  index[0] = static_cast<double>(tensors.size());
  for (std::size_t k = 0; k < tensors.size(); ++k) index[k + 1] = static_cast<double>(tensors[k]->size());
  // Write beside the target and rename so a failure never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCategory::kIo, "cannot open " + tmp.string() + " for writing");
    write_tensor(out, index);
    for (const auto* t : tensors) write_tensor(out, *t);
    out.flush();
    if (!out) fail(ErrorCategory::kIo, "failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Network::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  const Tensor index = read_tensor(in);
  auto params = parameters();
  if (index.rank() != 1 || index.size() != params.size() + 1 ||
      index[0] != static_cast<double>(params.size())) {
    fail(ErrorCategory::kDimension, "checkpoint does not match the network's parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = read_tensor(in);
    if (t.dims() != params[k].value->dims()) {
      fail(ErrorCategory::kDimension, "checkpoint tensor " + std::to_string(k) + " has the wrong shape");
    }
    *params[k].value = std::move(t);
  }
}

}  // namespace cseg
