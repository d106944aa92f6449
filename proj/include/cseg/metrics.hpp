#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cseg/tensor.hpp"

namespace cseg {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const noexcept { return k_; }
  std::int64_t operator()(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt) * k_ + pred]; }
  void add(int gt, int pred, std::int64_t n = 1);
  std::int64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int k_;
  std::vector<std::int64_t> counts_;
};

// Counts every pixel, or only those inside `region` when given.
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int num_classes,
                          const BinaryMask* region = nullptr);

// Per-class scores are empty for classes absent from both prediction and
// ground truth; means average the defined entries without weighting.
struct Scores {
  double accuracy = 0.0;
  std::vector<std::optional<double>> iou;
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<std::optional<double>> f1;
  std::optional<double> mean_iou;
  std::optional<double> mean_recall;
  std::optional<double> mean_f1;
};

Scores score(const ConfusionMatrix& cm);

// Face vs non-face: occlusion and background merge into class 0, face is 1.
LabelMap merge_two_class(const LabelMap& labels, int face_class = 1);

struct SuperpixelMap {
  Grid<int> ids;  // dense in 0..count-1
  int count = 0;

  void validate() const;
};

// Fraction of regions whose most frequent predicted label (ties to the
// smallest class) equals the region's ground-truth label.
double superpixel_accuracy(const LabelMap& pred, std::span<const int> region_labels,
                           const SuperpixelMap& superpixels);

// Total 8-connected components over the non-background classes 1..K-1.
int foreground_components(const LabelMap& labels, int num_classes);

// Mean over images of |cc(pred) - cc(gt)|.
double sparsity(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int num_classes);

struct MetricsRow {
  std::string method;
  std::string split;
  Scores scores;
  std::optional<double> superpixel_accuracy;
  double sparsity = 0.0;
};

// Header: method,split,acc,iou_<k>...,iou_mean,recall_<k>...,recall_mean,
// f1_<k>...,f1_mean,acc_sp,sparsity. Undefined scores print as NA.
void write_metrics_header(std::ostream& out, int num_classes);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

}  // namespace cseg
