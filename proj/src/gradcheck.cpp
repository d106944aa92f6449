#include "cseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cseg {

GradcheckReport gradcheck(const std::function<double(const Tensor&)>& objective,
                          const Tensor& analytic, const Tensor& at, const GradcheckOptions& options) {
  if (!(options.step >= 1e-7 && options.step <= 1e-3)) {
    fail(ErrorCategory::kInvalidArgument, "gradcheck step must lie in [1e-7, 1e-3]");
  }
  if (analytic.dims() != at.dims()) fail(ErrorCategory::kDimension, "gradient dims differ from input");
  GradcheckReport report;
  Tensor probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double x = at[i];
    probe[i] = x + options.step;
    const double up = objective(probe);
    probe[i] = x - options.step;
    const double down = objective(probe);
    probe[i] = x;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorCategory::kNonFinite, "objective is not finite while probing");
    }
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
    const double err = std::abs(a - numeric) / denom;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
    }
    if (!(err < options.tolerance)) report.failing.push_back(i);
    ++report.checked;
  }
  return report;
}

GradcheckReport gradcheck(const std::function<LossResult(const Tensor&)>& loss, const Tensor& at,
                          const GradcheckOptions& options) {
  const auto base = loss(at);
  return gradcheck([&](const Tensor& z) { return loss(z).value; }, base.gradient, at, options);
}

}  // namespace cseg
