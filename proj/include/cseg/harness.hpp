#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cseg/blobs.hpp"
#include "cseg/consensus.hpp"
#include "cseg/geometry.hpp"
#include "cseg/metrics.hpp"
#include "cseg/morphology.hpp"
#include "cseg/tensor.hpp"

namespace cseg {

enum class LossKind { kPixelwise, kBlobMarginalized, kConsensus };

std::string_view loss_kind_name(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

// Where consensus/marginalized training takes its blobs from.
enum class BlobSource { kSynth, kLabels };

std::string_view blob_source_name(BlobSource source);
BlobSource parse_blob_source(std::string_view name);

// Desk-scale defaults: 64x64, 500/100/100, batch 16, 40 epochs,
// lr 1e-3 with plateau x0.1 after 5 stale epochs, alpha 10, beta 5.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  int image_size = 64;
  int train_count = 500;
  int val_count = 100;
  int test_count = 100;
  int max_occluders = 3;
  double noise = 0.08;

  LossKind loss = LossKind::kConsensus;
  BlobSource blob_source = BlobSource::kSynth;
  double alpha = 10.0;
  double beta = 5.0;
  double learning_rate = 1e-3;
  double plateau_factor = 0.1;
  int plateau_patience = 5;
  double min_learning_rate = 1e-7;
  int epochs = 40;
  int batch_size = 16;
  bool flip = true;
  double dropout = 0.2;

  void validate() const;
  LossConfig loss_config() const;
};

// key=value lines in a fixed order; readable back as a config file.
void write_config(std::ostream& out, const ExperimentConfig& cfg);

// ---- synthetic scenes

enum class OccluderShape { kRectangle, kEllipse, kPolyline };

struct Occluder {
  OccluderShape shape = OccluderShape::kRectangle;
  double cx = 0.0;
  double cy = 0.0;
  double half_w = 0.0;  // rectangle half extents / ellipse radii
  double half_h = 0.0;
  double angle = 0.0;
  std::vector<Point2> path;  // polyline vertices
  double thickness = 0.0;    // polyline half width
  std::array<double, 3> color{};
  double stripe = 0.0;       // texture amplitude
};

struct SceneSpec {
  int size = 64;
  double face_cx = 32.0;
  double face_cy = 32.0;
  double face_rx = 16.0;
  double face_ry = 20.0;
  double face_angle = 0.0;
  std::array<double, 3> skin{};
  double texture_freq = 0.5;
  double texture_phase = 0.0;
  std::array<double, 3> background{};
  std::array<double, 3> background_slope{};
  std::vector<Occluder> occluders;
  double noise = 0.08;
};

// Random face with 0..max_occluders occluders centred on the face.
SceneSpec random_scene_spec(std::mt19937_64& rng, int size, int max_occluders, double noise);

struct SyntheticScene {
  Tensor image;  // 3 x H x W
  LabelMap labels;
  BlobMap blobs;
  SuperpixelMap superpixels;
};

// Face and occluder masks go through the same label synthesis as the
// mask pipeline: occluder pixels inside the face become occlusion blobs,
// outside it they are background. Pixel noise is drawn from `rng`.
SyntheticScene render_scene(const SceneSpec& spec, std::mt19937_64& rng);

// Superpixels: 8x8 cells split by blob, so every region is label-pure.
SuperpixelMap grid_superpixels(const BlobMap& blobs, int cell);

// Writes <dir>/manifest.txt and <dir>/{train,val,test}/NNNNN_{image,blobs,sp}.cseg
// plus NNNNN_labels.pgm. Each split draws from its own seed stream.
void synth_generate(const ExperimentConfig& cfg, const std::filesystem::path& dir);

struct Sample {
  Tensor image;
  LabelMap labels;
  BlobMap blobs;
  SuperpixelMap superpixels;
  std::vector<int> region_labels;
};

std::vector<Sample> load_split(const std::filesystem::path& dir, std::string_view split);

// Mirror image, labels, blobs and superpixels left-right.
Sample flipped(const Sample& sample);

// ---- training / evaluation

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_mean_recall = 0.0;
  double val_sparsity = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_val_recall = 0.0;
};

// Writes <run>/config.txt, <run>/model.desc, <run>/train_log.csv,
// <run>/best.ckpt (best validation mean recall) and <run>/last.ckpt. A non-finite loss leaves the log so far plus
// <run>/error.txt and throws kNonFinite.
TrainResult train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
                  const std::filesystem::path& run_dir);

void write_train_log_header(std::ostream& out);
void write_train_log_row(std::ostream& out, const EpochRecord& record);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path descriptor;  // defaults to model.desc beside the checkpoint
  std::filesystem::path data_dir;
  std::string split = "test";
  std::string method = "model";
  bool two_class = false;
};

// Scores hard predictions of the checkpoint on one split. Two-class mode
// merges occlusion into non-face in both prediction and ground truth.
MetricsRow evaluate(const EvalOptions& options);

// ---- mask pipeline

// residual -> refine -> connected components -> label synthesis.
SynthesizedLabels pipeline_run(const BinaryMask& full, const BinaryMask& teacher,
                               const RefineKernels& kernels = {});

}  // namespace cseg
