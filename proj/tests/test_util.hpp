#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "vaoi/nn.hpp"

namespace vaoi::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  long checked = 0;
};

/// Central differences over every scalar in `params`, compared with the
/// analytic gradient in `grads` (same order and shapes).
inline GradCheck check_gradients(const ParamRefs& params, const ParamRefs& grads,
                                 const std::function<double()>& loss, double h = 1e-5,
                                 double floor = 1e-6) {
  GradCheck out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat& w = *params[p].value;
    const Mat& g = *grads[p].value;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double up = loss();
      w.data()[i] = saved - h;
      const double down = loss();
      w.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g.data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - analytic) / denom);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace vaoi::testing
