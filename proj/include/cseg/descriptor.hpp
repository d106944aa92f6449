#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cseg {

enum class LayerKind {
  kPad,         // reflection padding
  kConv,        // convolution (stride, dilation, optional zero padding)
  kElu,
  kShuffle,     // sub-pixel rearrangement C*r^2 x H x W -> C x rH x rW
  kClassifier,  // final convolution into class logits
  kBatchNorm,   // descriptor only
  kConcat,      // descriptor only: channel concat with an earlier layer's output
  kDropout,
};

std::string_view kind_name(LayerKind kind);
LayerKind parse_kind(std::string_view name);

// One layer. `extra` is the padding width for pad layers, the implicit zero
// padding for conv/classifier layers, the 1-based source layer id for
// concat layers and the drop probability in percent for dropout layers.
struct LayerSpec {
  LayerKind kind = LayerKind::kElu;
  int extra = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
  int ratio = 1;

  bool is_conv() const { return kind == LayerKind::kConv || kind == LayerKind::kClassifier; }
  std::int64_t parameter_count() const;
  void validate() const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using Shape = std::array<int, 3>;  // C, H, W

// Text form, one layer per line: `kind k h w stride dilation cin cout ratio`.
// Blank lines and '#' comments are ignored.
std::vector<LayerSpec> parse_descriptor(std::istream& in);
std::vector<LayerSpec> load_descriptor(const std::filesystem::path& path);
void write_descriptor(std::ostream& out, const std::vector<LayerSpec>& layers);

// Output shape after every layer. Throws kDimension on incompatibility.
std::vector<Shape> shape_check(const std::vector<LayerSpec>& layers, Shape input);

std::int64_t parameter_count(const std::vector<LayerSpec>& layers);

struct ReceptiveField {
  double rf = 1.0;    // input pixels seen by one unit
  double jump = 1.0;  // input pixels between adjacent units
};

// rf' = rf + (k_eff - 1) * jump, jump' = jump * stride with
// k_eff = 1 + (k - 1) * dilation; a shuffle divides jump by its ratio and a
// concat keeps the wider of its two inputs. Pointwise layers pass through.
// One entry per layer; the last one is the network's receptive field.
std::vector<ReceptiveField> receptive_field(const std::vector<LayerSpec>& layers);

// The 48-layer encoder/sub-encoder/decoder for 128x128 inputs, including
// the concat of layers 19 and 27 (inserted after layer 27).
std::vector<LayerSpec> appendix_descriptor();

// Index of each appendix table row (1..48) inside appendix_descriptor();
// the concat entry has no table row.
std::vector<int> appendix_row_ids();

// Trainable desk-scale stack producing num_classes x H x W logits:
// pad+conv3x3(3->16)-ELU, pad+conv3x3/2(16->32)-ELU,
// pad2+conv3x3 dilation 2 (32->32)-ELU, pad4+conv3x3 dilation 4 (32->32)-ELU,
// [dropout], conv1x1(32->4K), shuffle x2. Receptive field 29.
std::vector<LayerSpec> desk_descriptor(int num_classes, double dropout_rate);

}  // namespace cseg
