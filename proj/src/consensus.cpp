#include "cseg/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <string>

namespace cseg {

namespace {

struct Blob {
  int id = 0;
  int cls = -1;
  std::vector<std::size_t> pixels;
};

void check_inputs(const Tensor& logits, const LabelMap& labels, const LossConfig& cfg) {
  cfg.validate();
  if (logits.rank() != 3) fail(ErrorCategory::kDimension, "logits must be KxHxW");
  if (logits.dim(0) != static_cast<std::size_t>(cfg.num_classes)) {
    fail(ErrorCategory::kDimension, "logit channels do not match num_classes");
  }
  if (logits.dim(1) != static_cast<std::size_t>(labels.height()) ||
      logits.dim(2) != static_cast<std::size_t>(labels.width())) {
    fail(ErrorCategory::kDimension, "label map dims do not match logits");
  }
  for (int v : labels.values()) {
    if (v < 0 || v >= cfg.num_classes) fail(ErrorCategory::kInvalidArgument, "class id out of range");
  }
  if (!logits.all_finite()) fail(ErrorCategory::kNonFinite, "logits are not finite");
}

std::vector<Blob> group_blobs(const LabelMap& labels, const BlobMap& blobs) {
  if (!labels.same_shape(blobs.ids)) fail(ErrorCategory::kDimension, "blob map dims do not match labels");
  std::map<int, Blob> by_id;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int id = blobs.ids[s];
    if (id < 0) fail(ErrorCategory::kInvalidArgument, "negative blob id");
    auto& blob = by_id[id];
    if (blob.pixels.empty()) {
      blob.id = id;
      blob.cls = labels[s];
    } else if (blob.cls != labels[s]) {
      fail(ErrorCategory::kInvalidArgument,
           "blob " + std::to_string(id) + " spans more than one ground-truth class");
    }
    blob.pixels.push_back(s);
  }
  std::vector<Blob> out;
  out.reserve(by_id.size());
  for (auto& [id, blob] : by_id) out.push_back(std::move(blob));
  return out;
}

// Per-pixel softmax probabilities and log-softmax, channel-major like z.
struct SoftmaxCache {
  Tensor probs;
  Tensor log_probs;
};

SoftmaxCache softmax_with_logs(const Tensor& logits) {
  const std::size_t k = logits.dim(0);
  const std::size_t plane = logits.dim(1) * logits.dim(2);
  SoftmaxCache cache{Tensor(logits.dims()), Tensor(logits.dims())};
  for (std::size_t s = 0; s < plane; ++s) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) zmax = std::max(zmax, logits[c * plane + s]);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += std::exp(logits[c * plane + s] - zmax);
    const double lse = zmax + std::log(total);
    for (std::size_t c = 0; c < k; ++c) {
      const double lp = logits[c * plane + s] - lse;
      cache.log_probs[c * plane + s] = lp;
      cache.probs[c * plane + s] = std::exp(lp);
    }
  }
  return cache;
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(alpha + beta > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "loss weights must be nonnegative with a positive sum");
  }
  if (!(epsilon > 0.0) || epsilon > 1e-6) {
    fail(ErrorCategory::kInvalidArgument, "epsilon must lie in (0, 1e-6]");
  }
  if (num_classes < 2) fail(ErrorCategory::kInvalidArgument, "need at least two classes");
}

LossResult pixelwise_ce(const Tensor& logits, const LabelMap& labels, const LossConfig& cfg) {
  check_inputs(logits, labels, cfg);
  const std::size_t k = logits.dim(0);
  const std::size_t plane = labels.size();
  const auto cache = softmax_with_logs(logits);
  const double inv = 1.0 / static_cast<double>(plane);
  LossResult result;
  result.gradient = Tensor(logits.dims());
  long double total = 0.0L;
  for (std::size_t s = 0; s < plane; ++s) {
    const auto y = static_cast<std::size_t>(labels[s]);
    total -= cache.log_probs[y * plane + s];
    for (std::size_t c = 0; c < k; ++c) {
      result.gradient[c * plane + s] = (cache.probs[c * plane + s] - (c == y ? 1.0 : 0.0)) * inv;
    }
  }
  result.value = static_cast<double>(total / static_cast<long double>(plane));
  return result;
}

LossResult blob_marginalized_ce(const Tensor& logits, const LabelMap& labels, const BlobMap& blobs,
                                const LossConfig& cfg) {
  check_inputs(logits, labels, cfg);
  const auto groups = group_blobs(labels, blobs);
  const std::size_t k = logits.dim(0);
  const std::size_t plane = labels.size();
  const auto cache = softmax_with_logs(logits);

  std::vector<std::size_t> class_pixels(k, 0);
  std::size_t occlusion_blobs = 0;
  for (const auto& b : groups) {
    if (b.cls == cfg.occlusion_class) {
      ++occlusion_blobs;
    } else {
      class_pixels[static_cast<std::size_t>(b.cls)] += b.pixels.size();
    }
  }

  LossResult result;
  result.gradient = Tensor(logits.dims());
  long double total = 0.0L;
  for (const auto& b : groups) {
    const double weight =
        b.cls == cfg.occlusion_class
            ? 1.0 / (static_cast<double>(occlusion_blobs) * static_cast<double>(b.pixels.size()))
            : 1.0 / static_cast<double>(class_pixels[static_cast<std::size_t>(b.cls)]);
    const auto y = static_cast<std::size_t>(b.cls);
    long double blob_sum = 0.0L;
    for (auto s : b.pixels) {
      blob_sum -= cache.log_probs[y * plane + s];
      for (std::size_t c = 0; c < k; ++c) {
        result.gradient[c * plane + s] = (cache.probs[c * plane + s] - (c == y ? 1.0 : 0.0)) * weight;
      }
    }
    const long double contribution = blob_sum * static_cast<long double>(weight);
    total += contribution;
    result.blobs.push_back({b.id, b.cls, b.pixels.size(), static_cast<double>(contribution), 0.0});
  }
  result.value = static_cast<double>(total);
  return result;
}

BlobStats blob_mean_prob(const Tensor& probs, std::span<const std::size_t> pixels, int blob_id) {
  if (probs.rank() != 3) fail(ErrorCategory::kDimension, "probabilities must be KxHxW");
  if (pixels.empty()) fail(ErrorCategory::kInvalidArgument, "blob has no pixels");
  const std::size_t k = probs.dim(0);
  const std::size_t plane = probs.dim(1) * probs.dim(2);
  BlobStats stats;
  stats.blob_id = blob_id;
  stats.size = pixels.size();
  stats.mean_prob.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    long double acc = 0.0L;
    for (auto s : pixels) {
      if (s >= plane) fail(ErrorCategory::kDimension, "blob pixel outside the image");
      acc += probs[c * plane + s];
    }
    stats.mean_prob[c] = static_cast<double>(acc / static_cast<long double>(pixels.size()));
  }
  return stats;
}

LossResult consensus_loss(const Tensor& logits, const LabelMap& labels, const BlobMap& blobs,
                          const LossConfig& cfg) {
  check_inputs(logits, labels, cfg);
  const auto groups = group_blobs(labels, blobs);
  const std::size_t k = logits.dim(0);
  const std::size_t plane = labels.size();
  const auto cache = softmax_with_logs(logits);
  const double eps = cfg.epsilon;
  const double log_eps = std::log(eps);
  const double blob_weight = 1.0 / static_cast<double>(groups.size());

  auto clamped_log = [&](double p, double lp) { return p > eps ? lp : log_eps; };

  LossResult result;
  result.gradient = Tensor(logits.dims());
  long double total = 0.0L;
  std::vector<double> mean_log(k);
  std::vector<double> log_hat(k);
  std::vector<double> grad_hat(k);
  std::vector<double> scaled(k);

  for (const auto& b : groups) {
    const auto n = static_cast<double>(b.pixels.size());
    const auto target = static_cast<std::size_t>(b.cls);
    const auto stats = blob_mean_prob(cache.probs, b.pixels, b.id);
    const auto& hat = stats.mean_prob;

    for (std::size_t c = 0; c < k; ++c) {
      long double acc = 0.0L;
      for (auto s : b.pixels) {
        acc += clamped_log(cache.probs[c * plane + s], cache.log_probs[c * plane + s]);
      }
      mean_log[c] = static_cast<double>(acc / static_cast<long double>(b.pixels.size()));
      log_hat[c] = hat[c] > eps ? std::log(hat[c]) : log_eps;
    }

    const double term1 = -cfg.alpha * log_hat[target];
    // Summing per-pixel KL keeps every summand a proper divergence.
    long double kl_sum = 0.0L;
    for (auto s : b.pixels) {
      long double kl = 0.0L;
      for (std::size_t c = 0; c < k; ++c) {
        const double lp = clamped_log(cache.probs[c * plane + s], cache.log_probs[c * plane + s]);
        kl += static_cast<long double>(hat[c]) * (log_hat[c] - lp);
      }
      kl_sum += kl;
    }
    const double term2 = std::max(0.0, cfg.beta * static_cast<double>(kl_sum / b.pixels.size()));
    total += static_cast<long double>(term1) + static_cast<long double>(term2);
    result.blobs.push_back({b.id, b.cls, b.pixels.size(), term1, term2});

    // dL_c / d p^_k
    for (std::size_t c = 0; c < k; ++c) {
      double g = cfg.beta * (log_hat[c] + (hat[c] > eps ? 1.0 : 0.0) - mean_log[c]);
      if (c == target && hat[c] > eps) g -= cfg.alpha / hat[c];
      grad_hat[c] = g;
    }
    // Each pixel feeds p^ with weight 1/n and its own log p_s directly;
    // chain through the softmax Jacobian: dz = a - p * sum(a), a = p * dL/dp.
    for (auto s : b.pixels) {
      double sum_a = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double p = cache.probs[c * plane + s];
        double a = p * grad_hat[c] / n;
        if (p > eps) a -= cfg.beta * hat[c] / n;
        scaled[c] = a;
        sum_a += a;
      }
      for (std::size_t c = 0; c < k; ++c) {
        result.gradient[c * plane + s] =
            blob_weight * (scaled[c] - cache.probs[c * plane + s] * sum_a);
      }
    }
  }
  result.value = static_cast<double>(total / static_cast<long double>(groups.size()));
  return result;
}

void write_breakdown_csv(std::ostream& out, const LossResult& result) {
  out << "blob_id,class,size,term1,term2\n";
  out << std::setprecision(17);
  for (const auto& b : result.blobs) {
    out << b.blob_id << ',' << b.cls << ',' << b.size << ',' << b.term1 << ',' << b.term2 << '\n';
  }
}

}  // namespace cseg
