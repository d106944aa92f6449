#include "cseg/descriptor.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cseg/error.hpp"

namespace cseg {

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::kPad, "pad"},         {LayerKind::kConv, "conv"},
    {LayerKind::kElu, "elu"},         {LayerKind::kShuffle, "shuffle"},
    {LayerKind::kClassifier, "classifier"}, {LayerKind::kBatchNorm, "batchnorm"},
    {LayerKind::kConcat, "concat"},   {LayerKind::kDropout, "dropout"},
};

LayerSpec pad(int width) { return {.kind = LayerKind::kPad, .extra = width}; }

LayerSpec conv(int cin, int cout, int stride = 1, int dilation = 1) {
  return {.kind = LayerKind::kConv, .kernel_h = 3, .kernel_w = 3, .stride = stride,
          .dilation = dilation, .in_channels = cin, .out_channels = cout};
}

LayerSpec elu() { return {.kind = LayerKind::kElu}; }

LayerSpec batchnorm(int channels) {
  return {.kind = LayerKind::kBatchNorm, .in_channels = channels, .out_channels = channels};
}

LayerSpec shuffle(int ratio) { return {.kind = LayerKind::kShuffle, .ratio = ratio}; }

}  // namespace

std::string_view kind_name(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  fail(ErrorCategory::kFormat, "unknown layer kind '" + std::string(name) + "'");
}

std::int64_t LayerSpec::parameter_count() const {
  if (is_conv()) {
    return std::int64_t{out_channels} * in_channels * kernel_h * kernel_w + out_channels;
  }
  if (kind == LayerKind::kBatchNorm) return 2 * std::int64_t{in_channels};
  return 0;
}

void LayerSpec::validate() const {
  auto bad = [&](const std::string& why) {
    fail(ErrorCategory::kInvalidArgument, std::string(kind_name(kind)) + " layer: " + why);
  };
  if (stride < 1) bad("stride must be >= 1");
  if (dilation < 1) bad("dilation must be >= 1");
  if (extra < 0) bad("negative extra field");
  switch (kind) {
    case LayerKind::kConv:
    case LayerKind::kClassifier:
      if (kernel_h < 1 || kernel_w < 1) bad("kernel must be at least 1x1");
      if (in_channels < 1 || out_channels < 1) bad("channels must be positive");
      break;
    case LayerKind::kShuffle:
      if (ratio < 1) bad("ratio must be >= 1");
      break;
    case LayerKind::kConcat:
      if (extra < 1) bad("concat needs a source layer id");
      break;
    case LayerKind::kDropout:
      if (extra >= 100) bad("drop probability must be below 100 percent");
      break;
    default:
      break;
  }
}

std::vector<LayerSpec> parse_descriptor(std::istream& in) {
  std::vector<LayerSpec> layers;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string kind;
    if (!(fields >> kind)) continue;
    LayerSpec spec;
    spec.kind = parse_kind(kind);
    if (!(fields >> spec.extra >> spec.kernel_h >> spec.kernel_w >> spec.stride >> spec.dilation >>
          spec.in_channels >> spec.out_channels >> spec.ratio)) {
      fail(ErrorCategory::kFormat, "descriptor line " + std::to_string(line_no) + ": expected 9 fields");
    }
    std::string rest;
    if (fields >> rest) {
      fail(ErrorCategory::kFormat, "descriptor line " + std::to_string(line_no) + ": trailing fields");
    }
    spec.validate();
    layers.push_back(spec);
  }
  return layers;
}

std::vector<LayerSpec> load_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  return parse_descriptor(in);
}

void write_descriptor(std::ostream& out, const std::vector<LayerSpec>& layers) {
  out << "# kind k h w stride dilation cin cout ratio\n";
  for (const auto& l : layers) {
    out << kind_name(l.kind) << ' ' << l.extra << ' ' << l.kernel_h << ' ' << l.kernel_w << ' '
        << l.stride << ' ' << l.dilation << ' ' << l.in_channels << ' ' << l.out_channels << ' '
        << l.ratio << '\n';
  }
}

std::vector<Shape> shape_check(const std::vector<LayerSpec>& layers, Shape input) {
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape cur = input;
  if (cur[0] < 1 || cur[1] < 1 || cur[2] < 1) fail(ErrorCategory::kDimension, "input extents must be positive");
  for (std::size_t idx = 0; idx < layers.size(); ++idx) {
    const auto& l = layers[idx];
    l.validate();
    auto bad = [&](const std::string& why) {
      fail(ErrorCategory::kDimension,
           "layer " + std::to_string(idx + 1) + " (" + std::string(kind_name(l.kind)) + "): " + why);
    };
    auto [c, h, w] = cur;
    switch (l.kind) {
      case LayerKind::kPad:
        if (l.in_channels > 0 && l.in_channels != c) bad("channel mismatch");
        if (l.extra >= h || l.extra >= w) bad("reflection padding must be smaller than the input");
        cur = {c, h + 2 * l.extra, w + 2 * l.extra};
        break;
      case LayerKind::kConv:
      case LayerKind::kClassifier: {
        if (l.in_channels != c) bad("expects " + std::to_string(l.in_channels) + " channels, got " + std::to_string(c));
        const int keff_h = 1 + (l.kernel_h - 1) * l.dilation;
        const int keff_w = 1 + (l.kernel_w - 1) * l.dilation;
        const int hp = h + 2 * l.extra;
        const int wp = w + 2 * l.extra;
        if (hp < keff_h || wp < keff_w) bad("input smaller than the dilated kernel");
        cur = {l.out_channels, (hp - keff_h) / l.stride + 1, (wp - keff_w) / l.stride + 1};
        break;
      }
      case LayerKind::kElu:
      case LayerKind::kDropout:
        break;
      case LayerKind::kBatchNorm:
        if (l.in_channels > 0 && l.in_channels != c) bad("channel mismatch");
        break;
      case LayerKind::kShuffle: {
        const int r2 = l.ratio * l.ratio;
        if (c % r2 != 0) bad("channels not divisible by ratio^2");
        cur = {c / r2, h * l.ratio, w * l.ratio};
        break;
      }
      case LayerKind::kConcat: {
        if (static_cast<std::size_t>(l.extra) > idx) bad("concat source must precede it");
        const Shape src = shapes[static_cast<std::size_t>(l.extra) - 1];
        if (src[1] != h || src[2] != w) bad("concat spatial extents differ");
        cur = {c + src[0], h, w};
        break;
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::int64_t parameter_count(const std::vector<LayerSpec>& layers) {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.parameter_count();
  return total;
}

std::vector<ReceptiveField> receptive_field(const std::vector<LayerSpec>& layers) {
  std::vector<ReceptiveField> out;
  out.reserve(layers.size());
  ReceptiveField cur;
  for (std::size_t idx = 0; idx < layers.size(); ++idx) {
    const auto& l = layers[idx];
    l.validate();
    switch (l.kind) {
      case LayerKind::kConv:
      case LayerKind::kClassifier: {
        // Square kernels are the norm here; report the wider axis.
        const int k = std::max(l.kernel_h, l.kernel_w);
        const double keff = 1.0 + (k - 1) * static_cast<double>(l.dilation);
        cur.rf += (keff - 1.0) * cur.jump;
        cur.jump *= l.stride;
        break;
      }
      case LayerKind::kShuffle:
        cur.jump /= l.ratio;
        break;
      case LayerKind::kConcat: {
        if (static_cast<std::size_t>(l.extra) > idx) {
          fail(ErrorCategory::kInvalidArgument, "concat source must precede it");
        }
        const auto& src = out[static_cast<std::size_t>(l.extra) - 1];
        if (src.jump != cur.jump) fail(ErrorCategory::kInvalidArgument, "concat branches have different strides");
        cur.rf = std::max(cur.rf, src.rf);
        break;
      }
      case LayerKind::kPad:
      case LayerKind::kElu:
      case LayerKind::kBatchNorm:
      case LayerKind::kDropout:
        break;
    }
    out.push_back(cur);
  }
  return out;
}

std::vector<LayerSpec> appendix_descriptor() {
  std::vector<LayerSpec> l;
  // Encoder
  l.insert(l.end(), {pad(1), conv(3, 64), elu()});
  l.insert(l.end(), {pad(1), conv(64, 128, 2), elu(), batchnorm(128)});
  l.insert(l.end(), {pad(1), conv(128, 128), elu(), batchnorm(128)});
  l.insert(l.end(), {pad(1), conv(128, 128), elu(), batchnorm(128)});
  l.insert(l.end(), {pad(1), conv(128, 256, 2), elu(), batchnorm(256)});
  // Sub-encoder
  l.insert(l.end(), {pad(4), conv(256, 256, 1, 4), elu(), batchnorm(256)});
  l.insert(l.end(), {pad(3), conv(256, 256, 1, 3), elu(), batchnorm(256)});
  l.push_back({.kind = LayerKind::kConcat, .extra = 19});
  // Decoder
  l.insert(l.end(), {pad(1), conv(512, 512), elu(), batchnorm(512), shuffle(2)});
  l.insert(l.end(), {pad(1), conv(128, 128), elu(), batchnorm(128)});
  l.insert(l.end(), {pad(1), conv(128, 128), elu(), batchnorm(128), shuffle(2)});
  l.insert(l.end(), {pad(1), conv(32, 32), elu()});
  l.insert(l.end(), {pad(1), conv(32, 32), elu()});
  l.push_back({.kind = LayerKind::kClassifier, .extra = 1, .kernel_h = 3, .kernel_w = 3,
               .in_channels = 32, .out_channels = 3});
  return l;
}

std::vector<int> appendix_row_ids() {
  std::vector<int> rows;
  int row = 0;
  for (const auto& l : appendix_descriptor()) rows.push_back(l.kind == LayerKind::kConcat ? 0 : ++row);
  return rows;
}

std::vector<LayerSpec> desk_descriptor(int num_classes, double dropout_rate) {
  if (num_classes < 2) fail(ErrorCategory::kInvalidArgument, "need at least two classes");
  std::vector<LayerSpec> l;
  l.insert(l.end(), {pad(1), conv(3, 16), elu()});
  l.insert(l.end(), {pad(1), conv(16, 32, 2), elu()});
  l.insert(l.end(), {pad(2), conv(32, 32, 1, 2), elu()});
  l.insert(l.end(), {pad(4), conv(32, 32, 1, 4), elu()});
  if (dropout_rate > 0.0) {
    l.push_back({.kind = LayerKind::kDropout, .extra = static_cast<int>(dropout_rate * 100.0 + 0.5)});
  }
  l.push_back({.kind = LayerKind::kClassifier, .in_channels = 32, .out_channels = 4 * num_classes});
  l.push_back(shuffle(2));
  return l;
}

}  // namespace cseg
