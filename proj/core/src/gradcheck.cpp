#include "silrrt/gradcheck.hpp"

#include <cmath>

#include "silrrt/optim.hpp"

namespace silrrt::ad {

GradCheckReport finite_diff_check(const std::function<Tensor(Tape&)>& loss, std::span<Parameter* const> params,
                                  double eps) {
  zero_grads(params);
  {
    Tape tape;
    Tensor l = loss(tape);
    tape.backward(l);
  }
  auto evaluate = [&]() {
    Tape tape(false);
    return loss(tape).item();
  };
  GradCheckReport report;
  for (Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) {
          report.worst_parameter = p->name;
          report.worst_index = i;
          report.worst_analytic = analytic;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace silrrt::ad
