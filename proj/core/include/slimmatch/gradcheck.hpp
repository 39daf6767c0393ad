#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "slimmatch/tensor.hpp"

namespace slimmatch {

// One scalar coordinate of a leaf tensor.
struct ParamCoord {
  Tensor param;
  std::size_t index = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst = 0;  // position in the coordinate list
  std::vector<double> analytic;
  std::vector<double> numeric;
};

// Compares backward() against central differences of `f` at every listed
// coordinate. Relative error is |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|).
// Throws NumericError when f produces a non-finite value.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<ParamCoord>& coords, double step);

// Every coordinate of every listed tensor.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params, double step);

}  // namespace slimmatch
