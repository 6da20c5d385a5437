#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "omni/autodiff.hpp"
#include "omni/errors.hpp"

namespace omni {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
};

// Central finite differences at fp64 against the analytic gradients that
// `loss_with_grad` accumulates into the given params. `loss_fn` must be a
// deterministic pure evaluation of the same loss.
inline GradCheckResult finite_difference_check(const std::function<double()>& loss_with_grad,
                                               const std::function<double()>& loss_fn,
                                               const std::vector<Param*>& params,
                                               double h = 1e-5) {
  for (Param* p : params) p->zero_grad();
  const double base = loss_with_grad();
  if (!std::isfinite(base)) throw NumericError("finite_difference_check: loss is not finite");

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    for (size_t i = 0; i < p->value.data.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      const double lp = loss_fn();
      p->value.data[i] = saved - h;
      const double lm = loss_fn();
      p->value.data[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw NumericError("finite_difference_check: perturbed loss is not finite at " + p->name);
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi].data[i];
      const double rel = std::fabs(a - numeric) / (std::fabs(a) + std::fabs(numeric) + 1e-12);
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p->name;
        res.worst_index = static_cast<int64_t>(i);
      }
    }
  }
  return res;
}

}  // namespace omni
