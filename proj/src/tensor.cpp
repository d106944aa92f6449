#include "cseg/tensor.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace cseg {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kDimension: return "dimension";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kInvalidArgument: return "invalid-argument";
    case ErrorCategory::kDegenerate: return "degenerate";
    case ErrorCategory::kNonFinite: return "non-finite";
  }
  return "unknown";
}

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.empty()) fail(ErrorCategory::kDimension, "tensor needs at least one dimension");
  for (auto d : dims) {
    if (d == 0) fail(ErrorCategory::kDimension, "tensor extents must be positive");
  }
}

constexpr std::array<char, 4> kMagic = {'C', 'S', 'E', 'G'};
constexpr std::uint8_t kVersion = 0x01;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xFFu);
  out.write(b.data(), b.size());
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((bits >> (8 * k)) & 0xFFu);
  out.write(b.data(), b.size());
}

template <std::size_t N>
std::array<unsigned char, N> get_bytes(std::istream& in, const char* what) {
  std::array<unsigned char, N> b{};
  in.read(reinterpret_cast<char*>(b.data()), N);
  if (in.gcount() != static_cast<std::streamsize>(N)) {
    fail(ErrorCategory::kFormat, std::string("truncated tensor stream reading ") + what);
  }
  return b;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(product(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (product(dims_) != data_.size()) {
    fail(ErrorCategory::kDimension, "tensor payload does not match its dims");
  }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() != 3) fail(ErrorCategory::kDimension, "softmax expects a KxHxW tensor");
  const std::size_t k = logits.dim(0);
  if (k < 2) fail(ErrorCategory::kDimension, "softmax needs at least two channels");
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  Tensor out(logits.dims());
  const double* z = logits.data();
  double* p = out.data();
  for (std::size_t s = 0; s < plane; ++s) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) zmax = std::max(zmax, z[c * plane + s]);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double e = std::exp(z[c * plane + s] - zmax);
      p[c * plane + s] = e;
      total += e;
    }
    for (std::size_t c = 0; c < k; ++c) p[c * plane + s] /= total;
  }
  return out;
}

LabelMap hard_predict(const Tensor& probs) {
  if (probs.rank() != 3) fail(ErrorCategory::kDimension, "hard_predict expects a KxHxW tensor");
  const std::size_t k = probs.dim(0);
  const int h = static_cast<int>(probs.dim(1));
  const int w = static_cast<int>(probs.dim(2));
  const std::size_t plane = probs.dim(1) * probs.dim(2);
  LabelMap out(h, w, 0);
  for (std::size_t s = 0; s < plane; ++s) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (probs[c * plane + s] > probs[best * plane + s]) best = c;
    }
    out[s] = static_cast<int>(best);
  }
  return out;
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.rank() == 0) fail(ErrorCategory::kDimension, "cannot write an empty-dims tensor");
  if (t.rank() > 255) fail(ErrorCategory::kDimension, "tensor rank exceeds 255");
  out.write(kMagic.data(), kMagic.size());
  out.put(static_cast<char>(kVersion));
  out.put(static_cast<char>(t.rank()));
  for (auto d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      fail(ErrorCategory::kDimension, "tensor extent exceeds u32");
    }
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : t.values()) put_f64(out, v);
  if (!out) fail(ErrorCategory::kIo, "failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
  const auto magic = get_bytes<4>(in, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin(),
                  [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); })) {
    fail(ErrorCategory::kFormat, "bad tensor magic");
  }
  const auto header = get_bytes<2>(in, "header");
  if (header[0] != kVersion) fail(ErrorCategory::kFormat, "unsupported tensor version");
  const std::size_t rank = header[1];
  if (rank == 0) fail(ErrorCategory::kFormat, "tensor rank 0");
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) {
    const auto b = get_bytes<4>(in, "dims");
    d = std::size_t{b[0]} | (std::size_t{b[1]} << 8) | (std::size_t{b[2]} << 16) |
        (std::size_t{b[3]} << 24);
    if (d == 0) fail(ErrorCategory::kFormat, "zero tensor extent");
  }
  const std::size_t count = product(dims);
  std::vector<double> data(count);
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    fail(ErrorCategory::kFormat, "truncated tensor payload");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t{raw[i * 8 + k]} << (8 * k);
    data[i] = std::bit_cast<double>(bits);
  }
  return Tensor(std::move(dims), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  return read_tensor(in);
}

Tensor grid_to_tensor(const Grid<int>& grid) {
  if (grid.size() == 0) fail(ErrorCategory::kDimension, "empty grid");
  Tensor t({static_cast<std::size_t>(grid.height()), static_cast<std::size_t>(grid.width())});
  for (std::size_t k = 0; k < grid.size(); ++k) t[k] = static_cast<double>(grid[k]);
  return t;
}

Grid<int> tensor_to_grid(const Tensor& t) {
  if (t.rank() != 2) fail(ErrorCategory::kDimension, "integer grids are stored as rank-2 tensors");
  Grid<int> grid(static_cast<int>(t.dim(0)), static_cast<int>(t.dim(1)));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double v = t[k];
    if (!(v == std::floor(v)) || std::abs(v) > 2147483647.0) {
      fail(ErrorCategory::kFormat, "grid tensor holds a non-integer value");
    }
    grid[k] = static_cast<int>(v);
  }
  return grid;
}

}  // namespace cseg
