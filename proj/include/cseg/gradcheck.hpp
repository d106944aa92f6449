#pragma once

#include <functional>
#include <vector>

#include "cseg/consensus.hpp"
#include "cseg/tensor.hpp"

namespace cseg {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Coordinates whose analytic and numeric magnitudes are both below this
  // are compared in absolute terms.
  double magnitude_floor = 1e-8;
};

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::vector<std::size_t> failing;

  bool passed() const { return failing.empty(); }
};

// err_i = |a_i - n_i| / max(|a_i|, |n_i|, floor) with n_i the central
// difference (f(x + h e_i) - f(x - h e_i)) / 2h. Throws kNonFinite if a
// probe evaluates to a non-finite value.
GradcheckReport gradcheck(const std::function<double(const Tensor&)>& objective,
                          const Tensor& analytic, const Tensor& at, const GradcheckOptions& options);

// Convenience form for loss operators that return their own gradient.
GradcheckReport gradcheck(const std::function<LossResult(const Tensor&)>& loss, const Tensor& at,
                          const GradcheckOptions& options);

}  // namespace cseg
