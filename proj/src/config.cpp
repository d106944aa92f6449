#include <cmath>
#include <ostream>
#include <string>

#include "cseg/harness.hpp"

namespace cseg {

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kPixelwise: return "pixelwise";
    case LossKind::kBlobMarginalized: return "blob_marginalized";
    case LossKind::kConsensus: return "consensus";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "pixelwise") return LossKind::kPixelwise;
  if (name == "blob_marginalized") return LossKind::kBlobMarginalized;
  if (name == "consensus") return LossKind::kConsensus;
  fail(ErrorCategory::kInvalidArgument, "unknown loss kind '" + std::string(name) + "'");
}

std::string_view blob_source_name(BlobSource source) {
  return source == BlobSource::kSynth ? "synth" : "labels";
}

BlobSource parse_blob_source(std::string_view name) {
  if (name == "synth") return BlobSource::kSynth;
  if (name == "labels") return BlobSource::kLabels;
  fail(ErrorCategory::kInvalidArgument, "unknown blob source '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCategory::kInvalidArgument, std::string("config: ") + what);
  };
  need(image_size >= 10, "image_size must be at least 10");
  need(image_size % 2 == 0, "image_size must be even");
  need(train_count > 0 && val_count > 0 && test_count > 0, "dataset sizes must be positive");
  need(max_occluders >= 0 && max_occluders <= 3, "max_occluders must be in 0..3");
  need(std::isfinite(noise) && noise >= 0.0, "noise must be >= 0");
  need(std::isfinite(alpha) && alpha >= 0.0, "alpha must be >= 0");
  need(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  need(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning_rate must be >= 0");
  need(plateau_factor > 0.0 && plateau_factor <= 1.0, "plateau_factor must be in (0,1]");
  need(plateau_patience >= 0, "plateau_patience must be >= 0");
  need(min_learning_rate >= 0.0, "min_learning_rate must be >= 0");
  need(epochs > 0, "epochs must be positive");
  need(batch_size > 0, "batch_size must be positive");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0,1)");
}

LossConfig ExperimentConfig::loss_config() const {
  LossConfig lc;
  lc.alpha = alpha;
  lc.beta = beta;
  lc.num_classes = 3;
  return lc;
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  const auto old_precision = out.precision(17);
  out << "seed=" << cfg.seed << '\n'
      << "image_size=" << cfg.image_size << '\n'
      << "train_count=" << cfg.train_count << '\n'
      << "val_count=" << cfg.val_count << '\n'
      << "test_count=" << cfg.test_count << '\n'
      << "max_occluders=" << cfg.max_occluders << '\n'
      << "noise=" << cfg.noise << '\n'
      << "loss=" << loss_kind_name(cfg.loss) << '\n'
      << "blob_source=" << blob_source_name(cfg.blob_source) << '\n'
      << "alpha=" << cfg.alpha << '\n'
      << "beta=" << cfg.beta << '\n'
      << "learning_rate=" << cfg.learning_rate << '\n'
      << "plateau_factor=" << cfg.plateau_factor << '\n'
      << "plateau_patience=" << cfg.plateau_patience << '\n'
      << "min_learning_rate=" << cfg.min_learning_rate << '\n'
      << "epochs=" << cfg.epochs << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "flip=" << (cfg.flip ? "true" : "false") << '\n'
      << "dropout=" << cfg.dropout << '\n';
  out.precision(old_precision);
}

SynthesizedLabels pipeline_run(const BinaryMask& full, const BinaryMask& teacher, const RefineKernels& kernels) {
  if (!full.same_shape(teacher)) fail(ErrorCategory::kDimension, "full and teacher masks differ in size");
  const BinaryMask rho = refine_residual(residual(full, teacher), kernels);
  return synthesize_labels(teacher, connected_components(rho));
}

}  // namespace cseg
