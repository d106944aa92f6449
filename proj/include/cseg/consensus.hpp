#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "cseg/blobs.hpp"
#include "cseg/tensor.hpp"

namespace cseg {

struct LossConfig {
  double alpha = 10.0;
  double beta = 5.0;
  int num_classes = 3;
  // Lower clamp applied to probabilities inside logarithms.
  double epsilon = 1e-12;
  // Class whose blobs are averaged individually by the blob-marginalized
  // cross-entropy; every other class is pooled.
  int occlusion_class = kOcclusion;

  void validate() const;
};

struct BlobStats {
  int blob_id = 0;
  std::size_t size = 0;
  std::vector<double> mean_prob;  // length K, sums to one
};

struct BlobTerm {
  int blob_id = 0;
  int cls = 0;
  std::size_t size = 0;
  double term1 = 0.0;  // alpha * -log(mean_prob[cls])
  double term2 = 0.0;  // beta * mean_s KL(mean_prob || p_s)
};

struct LossResult {
  double value = 0.0;
  Tensor gradient;  // dL/dz, same dims as the logits
  std::vector<BlobTerm> blobs;
};

// Mean over pixels of -log softmax(z)[y].
LossResult pixelwise_ce(const Tensor& logits, const LabelMap& labels, const LossConfig& cfg);

// Cross-entropy with each pooled class averaged over its own pixels and
// each occlusion blob averaged separately, the blob means then averaged:
//   sum_{k pooled} mean_{s in k} l(s) + mean_{O} mean_{s in O} l(s).
LossResult blob_marginalized_ce(const Tensor& logits, const LabelMap& labels, const BlobMap& blobs,
                                const LossConfig& cfg);

// Mean softmax column over the given flat pixel indices.
BlobStats blob_mean_prob(const Tensor& probs, std::span<const std::size_t> pixels, int blob_id = 0);

// Structure-via-consensus objective, averaged uniformly over all blobs:
//   (1/N_C) sum_c [ alpha * -log p^_c[k*] + (beta/|c|) sum_s KL(p^_c || p_s) ].
LossResult consensus_loss(const Tensor& logits, const LabelMap& labels, const BlobMap& blobs,
                          const LossConfig& cfg);

// CSV rows: blob_id,class,size,term1,term2 (with header).
void write_breakdown_csv(std::ostream& out, const LossResult& result);

}  // namespace cseg
