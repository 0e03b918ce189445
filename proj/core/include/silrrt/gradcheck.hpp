#pragma once

#include <functional>
#include <span>
#include <string>

#include "silrrt/autodiff.hpp"

namespace silrrt::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
};

/// Compares reverse-mode gradients of `loss` with central finite differences
/// over every element of `params`. Relative error per element is
/// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|). `loss` must be deterministic and
/// build its graph on the tape it is handed.
GradCheckReport finite_diff_check(const std::function<Tensor(Tape&)>& loss, std::span<Parameter* const> params,
                                  double eps = 1e-5);

}  // namespace silrrt::ad
