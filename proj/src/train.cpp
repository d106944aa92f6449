#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "cseg/adam.hpp"
#include "cseg/descriptor.hpp"
#include "cseg/harness.hpp"
#include "cseg/network.hpp"
#include "cseg/rng.hpp"

namespace cseg {

namespace {

namespace fs = std::filesystem;

// Scene colours live in roughly [0,1]; the network sees them centred.
Tensor network_input(const Tensor& image) {
  Tensor x = image;
  for (double& v : x.values()) v = 2.0 * v - 1.0;
  return x;
}

struct SplitScores {
  Scores scores;
  double sparsity = 0.0;
  std::optional<double> superpixel_accuracy;
};

// Images are scored one after another and merged in index order so the
// totals do not depend on scheduling.
SplitScores score_split(Network& net, const std::vector<Sample>& samples, bool two_class) {
  const int k = two_class ? 2 : 3;
  ConfusionMatrix cm(k);
  std::vector<LabelMap> preds;
  std::vector<LabelMap> gts;
  preds.reserve(samples.size());
  gts.reserve(samples.size());
  long correct_regions = 0;
  long regions = 0;
  for (const Sample& s : samples) {
    LabelMap pred = hard_predict(softmax_channels(net.forward(network_input(s.image), false)));
    LabelMap gt = s.labels;
    std::vector<int> region_labels = s.region_labels;
    if (two_class) {
      pred = merge_two_class(pred);
      gt = merge_two_class(gt);
      for (int& r : region_labels) r = r == kFace ? 1 : 0;
    }
    cm += confusion(pred, gt, k);
    if (s.superpixels.count > 0) {
      const double acc = superpixel_accuracy(pred, region_labels, s.superpixels);
      correct_regions += std::lround(acc * s.superpixels.count);
      regions += s.superpixels.count;
    }
    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  SplitScores out;
  out.scores = score(cm);
  out.sparsity = sparsity(preds, gts, k);
  if (regions > 0) out.superpixel_accuracy = static_cast<double>(correct_regions) / static_cast<double>(regions);
  return out;
}

LossResult sample_loss(const ExperimentConfig& cfg, const LossConfig& lc, const Tensor& logits, const Sample& s) {
  switch (cfg.loss) {
    case LossKind::kPixelwise: return pixelwise_ce(logits, s.labels, lc);
    case LossKind::kBlobMarginalized:
      return blob_marginalized_ce(logits, s.labels,
                                  cfg.blob_source == BlobSource::kSynth ? s.blobs : blobs_from_labels(s.labels, true),
                                  lc);
    case LossKind::kConsensus:
      return consensus_loss(logits, s.labels,
                            cfg.blob_source == BlobSource::kSynth ? s.blobs : blobs_from_labels(s.labels, true), lc);
  }
  fail(ErrorCategory::kInvalidArgument, "unknown loss kind");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
}

}  // namespace

void write_train_log_header(std::ostream& out) { out << "epoch,loss,val_mean_recall,val_sparsity,lr\n"; }

void write_train_log_row(std::ostream& out, const EpochRecord& r) {
  const auto old = out.precision(10);
  out << r.epoch << ',' << r.loss << ',' << r.val_mean_recall << ',' << r.val_sparsity << ',' << r.lr << '\n';
  out.precision(old);
}

TrainResult train(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& run_dir) {
  cfg.validate();
  const LossConfig lc = cfg.loss_config();
  const std::vector<Sample> train_set = load_split(data_dir, "train");
  const std::vector<Sample> val_set = load_split(data_dir, "val");
  for (const Sample& s : train_set) {
    if (s.image.dim(1) % 2 != 0 || s.image.dim(2) % 2 != 0) {
      fail(ErrorCategory::kDimension, "training images need even extents");
    }
  }

  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) fail(ErrorCategory::kIo, "cannot create " + run_dir.string() + ": " + ec.message());
  fs::remove(run_dir / "error.txt", ec);

  std::ostringstream cfg_text;
  write_config(cfg_text, cfg);
  write_text(run_dir / "config.txt", cfg_text.str());

  const std::vector<LayerSpec> specs = desk_descriptor(3, cfg.dropout);
  std::ostringstream desc_text;
  write_descriptor(desc_text, specs);
  write_text(run_dir / "model.desc", desc_text.str());

  Network net(specs, cfg.seed);
  Adam adam({.learning_rate = cfg.learning_rate});
  PlateauScheduler scheduler(cfg.plateau_factor, cfg.plateau_patience, cfg.min_learning_rate);
  std::mt19937_64 order_rng(cfg.seed ^ 0x6a09e667f3bcc909ull);

  std::ofstream log(run_dir / "train_log.csv", std::ios::binary);
  if (!log) fail(ErrorCategory::kIo, "cannot write training log in " + run_dir.string());
  write_train_log_header(log);

  TrainResult result;
  bool have_best = false;
  double lr = cfg.learning_rate;
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.set_learning_rate(lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(order_rng, 0, static_cast<int>(i) - 1))]);
    }
    long double loss_sum = 0.0L;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double scale = 1.0 / static_cast<double>(stop - start);
      net.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& base = train_set[order[b]];
        const bool flip = cfg.flip && uniform01(order_rng) < 0.5;
        const Sample& s = flip ? flipped(base) : base;
        LossResult lr_result;
        try {
          lr_result = sample_loss(cfg, lc, net.forward(network_input(s.image), true), s);
          if (!std::isfinite(lr_result.value) || !lr_result.gradient.all_finite()) {
            fail(ErrorCategory::kNonFinite, "loss or gradient is not finite");
          }
        } catch (const Error& e) {
          if (e.category() != ErrorCategory::kNonFinite) throw;
          // diverged: keep the log written so far, record why, leave checkpoints alone
          log.flush();
          std::ostringstream msg;
          msg << "epoch " << epoch << " sample " << order[b] << ": " << e.what();
          write_text(run_dir / "error.txt", "error=non-finite " + msg.str() + "\n");
          fail(ErrorCategory::kNonFinite, msg.str());
        }
        loss_sum += lr_result.value;
        for (double& g : lr_result.gradient.values()) g *= scale;
        net.backward(lr_result.gradient);
      }
      adam.step(net.parameters());
    }

    const SplitScores val = score_split(net, val_set, false);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = static_cast<double>(loss_sum / static_cast<long double>(train_set.size()));
    rec.val_mean_recall = val.scores.mean_recall.value_or(0.0);
    rec.val_sparsity = val.sparsity;
    rec.lr = lr;
    write_train_log_row(log, rec);
    log.flush();
    result.log.push_back(rec);

    if (!have_best || rec.val_mean_recall > result.best_val_recall) {
      have_best = true;
      result.best_val_recall = rec.val_mean_recall;
      result.best_epoch = epoch;
      net.save(run_dir / "best.ckpt");
    }
    lr = scheduler.observe(rec.val_mean_recall, lr);
  }
  if (!log) fail(ErrorCategory::kIo, "short write on training log");
  net.save(run_dir / "last.ckpt");
  return result;
}

MetricsRow evaluate(const EvalOptions& options) {
  const fs::path desc = options.descriptor.empty() ? options.checkpoint.parent_path() / "model.desc"
                                                   : options.descriptor;
  Network net(load_descriptor(desc), 0);
  net.load(options.checkpoint);
  const std::vector<Sample> samples = load_split(options.data_dir, options.split);
  if (samples.empty()) fail(ErrorCategory::kInvalidArgument, "split '" + options.split + "' is empty");
  const SplitScores s = score_split(net, samples, options.two_class);
  MetricsRow row;
  row.method = options.method;
  row.split = options.split;
  row.scores = s.scores;
  row.superpixel_accuracy = s.superpixel_accuracy;
  row.sparsity = s.sparsity;
  return row;
}

}  // namespace cseg
