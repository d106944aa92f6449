#include "cseg/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "cseg/blobs.hpp"

namespace cseg {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1) fail(ErrorCategory::kInvalidArgument, "confusion matrix needs a class");
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::add(int gt, int pred, std::int64_t n) {
  if (gt < 0 || gt >= k_ || pred < 0 || pred >= k_) {
    fail(ErrorCategory::kInvalidArgument, "class id out of range");
  }
  counts_[static_cast<std::size_t>(gt) * k_ + pred] += n;
}

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) fail(ErrorCategory::kDimension, "confusion matrices differ in size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int num_classes,
                          const BinaryMask* region) {
  if (!pred.same_shape(gt)) fail(ErrorCategory::kDimension, "prediction and ground truth dims differ");
  if (region != nullptr && !region->same_shape(gt)) fail(ErrorCategory::kDimension, "region dims differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t s = 0; s < gt.size(); ++s) {
    if (region != nullptr && (*region)[s] == 0) continue;
    cm.add(gt[s], pred[s]);
  }
  return cm;
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

double ratio_or_zero(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Scores score(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  const std::int64_t total = cm.total();
  if (total == 0) fail(ErrorCategory::kInvalidArgument, "cannot score an empty confusion matrix");
  Scores s;
  std::int64_t trace = 0;
  for (int c = 0; c < k; ++c) {
    std::int64_t gt_count = 0;
    std::int64_t pred_count = 0;
    for (int o = 0; o < k; ++o) {
      gt_count += cm(c, o);
      pred_count += cm(o, c);
    }
    const std::int64_t tp = cm(c, c);
    trace += tp;
    const std::int64_t fn = gt_count - tp;
    const std::int64_t fp = pred_count - tp;
    if (gt_count == 0 && pred_count == 0) {
      s.iou.emplace_back();
      s.precision.emplace_back();
      s.recall.emplace_back();
      s.f1.emplace_back();
      continue;
    }
    s.iou.emplace_back(ratio_or_zero(tp, tp + fp + fn));
    s.precision.emplace_back(ratio_or_zero(tp, tp + fp));
    s.recall.emplace_back(ratio_or_zero(tp, tp + fn));
    s.f1.emplace_back(ratio_or_zero(2 * tp, 2 * tp + fp + fn));
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  s.mean_iou = mean_of(s.iou);
  s.mean_recall = mean_of(s.recall);
  s.mean_f1 = mean_of(s.f1);
  return s;
}

LabelMap merge_two_class(const LabelMap& labels, int face_class) {
  LabelMap out(labels.height(), labels.width(), 0);
  for (std::size_t s = 0; s < labels.size(); ++s) out[s] = labels[s] == face_class ? 1 : 0;
  return out;
}

void SuperpixelMap::validate() const {
  if (count < 1) fail(ErrorCategory::kInvalidArgument, "superpixel map has no regions");
  std::vector<bool> seen(static_cast<std::size_t>(count), false);
  for (int v : ids.values()) {
    if (v < 0 || v >= count) fail(ErrorCategory::kInvalidArgument, "superpixel id out of range");
    seen[static_cast<std::size_t>(v)] = true;
  }
  for (bool b : seen) {
    if (!b) fail(ErrorCategory::kInvalidArgument, "superpixel region is empty");
  }
}

double superpixel_accuracy(const LabelMap& pred, std::span<const int> region_labels,
                           const SuperpixelMap& superpixels) {
  superpixels.validate();
  if (!pred.same_shape(superpixels.ids)) fail(ErrorCategory::kDimension, "superpixel map dims differ");
  if (region_labels.size() != static_cast<std::size_t>(superpixels.count)) {
    fail(ErrorCategory::kDimension, "one ground-truth label per region is required");
  }
  int max_class = 0;
  for (int v : pred.values()) {
    if (v < 0) fail(ErrorCategory::kInvalidArgument, "negative class id");
    max_class = std::max(max_class, v);
  }
  const std::size_t k = static_cast<std::size_t>(max_class) + 1;
  std::vector<std::int64_t> votes(static_cast<std::size_t>(superpixels.count) * k, 0);
  for (std::size_t s = 0; s < pred.size(); ++s) {
    ++votes[static_cast<std::size_t>(superpixels.ids[s]) * k + static_cast<std::size_t>(pred[s])];
  }
  int correct = 0;
  for (int r = 0; r < superpixels.count; ++r) {
    const auto* row = votes.data() + static_cast<std::size_t>(r) * k;
    std::size_t mode = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (row[c] > row[mode]) mode = c;
    }
    if (static_cast<int>(mode) == region_labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return static_cast<double>(correct) / superpixels.count;
}

int foreground_components(const LabelMap& labels, int num_classes) {
  std::vector<int> classes(static_cast<std::size_t>(std::max(0, num_classes - 1)));
  std::iota(classes.begin(), classes.end(), 1);
  return count_class_components(labels, classes);
}

double sparsity(std::span<const LabelMap> preds, std::span<const LabelMap> gts, int num_classes) {
  if (preds.size() != gts.size()) fail(ErrorCategory::kDimension, "sparsity needs paired masks");
  if (preds.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].same_shape(gts[i])) fail(ErrorCategory::kDimension, "mask pair dims differ");
    total += std::abs(foreground_components(preds[i], num_classes) -
                      foreground_components(gts[i], num_classes));
  }
  return total / static_cast<double>(preds.size());
}

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  out << ',';
  if (v) {
    out << *v;
  } else {
    out << "NA";
  }
}

}  // namespace

void write_metrics_header(std::ostream& out, int num_classes) {
  out << "method,split,acc";
  for (const char* name : {"iou", "recall", "f1"}) {
    for (int c = 0; c < num_classes; ++c) out << ',' << name << '_' << c;
    out << ',' << name << "_mean";
  }
  out << ",acc_sp,sparsity\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  out << std::setprecision(10);
  out << row.method << ',' << row.split << ',' << row.scores.accuracy;
  for (const auto* column : {&row.scores.iou, &row.scores.recall, &row.scores.f1}) {
    for (const auto& v : *column) put(out, v);
    put(out, mean_of(*column));
  }
  put(out, row.superpixel_accuracy);
  out << ',' << row.sparsity << '\n';
}

}  // namespace cseg
