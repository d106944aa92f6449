#include "cseg/adam.hpp"

#include <algorithm>
#include <cmath>

namespace cseg {

void Adam::step(std::span<const ParameterRef> params) {
  for (const auto& p : params) {
    if (p.value->dims() != p.grad->dims()) fail(ErrorCategory::kDimension, "adam: gradient shape mismatch");
    if (!p.grad->all_finite()) fail(ErrorCategory::kNonFinite, "adam: non-finite gradient");
  }
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value->dims());
      second_.emplace_back(p.value->dims());
    }
  } else if (first_.size() != params.size()) {
    fail(ErrorCategory::kDimension, "adam: parameter list changed between steps");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = *params[k].value;
    const Tensor& grad = *params[k].grad;
    if (first_[k].dims() != value.dims()) fail(ErrorCategory::kDimension, "adam: moment shape mismatch");
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      first_[k][i] = b1 * first_[k][i] + (1.0 - b1) * g;
      second_[k][i] = b2 * second_[k][i] + (1.0 - b2) * g * g;
      const double m_hat = first_[k][i] / correction1;
      const double v_hat = second_[k][i] / correction2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

double PlateauScheduler::observe(double metric, double current_lr) {
  if (!seen_ || metric > best_) {
    seen_ = true;
    best_ = metric;
    stale_epochs_ = 0;
    return current_lr;
  }
  if (++stale_epochs_ > patience_) {
    stale_epochs_ = 0;
    return std::max(floor_, current_lr * factor_);
  }
  return current_lr;
}

}  // namespace cseg
