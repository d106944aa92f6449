#pragma once

#include <span>
#include <vector>

#include "cseg/network.hpp"
#include "cseg/tensor.hpp"

namespace cseg {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moments are created lazily on the first step
// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(std::span<const ParameterRef> params);

  double learning_rate() const noexcept { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  long step_count() const noexcept { return steps_; }

 private:
  AdamOptions options_;
  long steps_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

// Multiplies the learning rate by `factor` once the monitored metric
// (higher is better) has not improved for more than `patience` epochs.
// Never goes below `floor`.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor, int patience, double floor)
      : factor_(factor), patience_(patience), floor_(floor) {}

  // Returns the learning rate to use from now on.
  double observe(double metric, double current_lr);

  double best() const noexcept { return best_; }

 private:
  double factor_;
  int patience_;
  double floor_;
  double best_ = -1.0;
  bool seen_ = false;
  int stale_epochs_ = 0;
};

}  // namespace cseg
