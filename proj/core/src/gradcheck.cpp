#include "slimmatch/gradcheck.hpp"

#include <cmath>

namespace slimmatch {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  const double v = f().item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<ParamCoord>& coords, double step) {
  if (!(step > 0.0)) throw ConfigError("finite_diff_check: step must be positive");

  for (const auto& c : coords) {
    Tensor p = c.param;
    p.zero_grad();
  }
  Tensor loss = f();
  if (!std::isfinite(loss.item())) {
    throw NumericError("finite_diff_check: function value is not finite");
  }
  backward(loss);

  GradCheckReport report;
  report.analytic.reserve(coords.size());
  report.numeric.reserve(coords.size());
  for (const auto& c : coords) report.analytic.push_back(c.param.grad_or_zero().at(c.index));

  for (std::size_t i = 0; i < coords.size(); ++i) {
    Tensor p = coords[i].param;
    double& slot = p.mutable_data()[coords[i].index];
    const double original = slot;
    slot = original + step;
    const double plus = evaluate(f);
    slot = original - step;
    const double minus = evaluate(f);
    slot = original;

    const double numeric = (plus - minus) / (2.0 * step);
    report.numeric.push_back(numeric);
    const double a = report.analytic[i];
    const double rel = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = i;
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<Tensor>& params, double step) {
  std::vector<ParamCoord> coords;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.numel(); ++i) coords.push_back({p, i});
  }
  return finite_diff_check(f, coords, step);
}

}  // namespace slimmatch
