#include "slimmatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slimmatch/errors.hpp"

namespace slimmatch {

std::vector<double> auc_at_thresholds(std::span<const double> errors_deg,
                                      std::span<const double> thresholds) {
  if (errors_deg.empty()) throw InputError("auc: empty error list");
  for (double e : errors_deg) {
    if (!(e >= 0.0)) throw InputError("auc: errors must be non-negative");
  }
  const double n = static_cast<double>(errors_deg.size());
  std::vector<double> out;
  for (double t : thresholds) {
    if (!(t > 0.0)) throw InputError("auc: thresholds must be positive");
    // Each error e contributes a step of height 1/n on [e, t].
    double area = 0.0;
    for (double e : errors_deg) area += std::max(0.0, t - e);
    out.push_back(area / (n * t));
  }
  return out;
}

MmaResult mma(std::span<const PointPairs> matches, std::span<const Homography> gt,
              std::span<const double> thresholds) {
  if (matches.size() != gt.size()) throw InputError("mma: one homography per pair required");
  if (matches.empty()) throw InputError("mma: no pairs");
  MmaResult result;
  result.values.assign(thresholds.size(), 0.0);
  for (std::size_t p = 0; p < matches.size(); ++p) {
    if (matches[p].empty()) {
      result.empty_pairs.push_back(p);
      continue;
    }
    std::vector<double> errors;
    errors.reserve(matches[p].size());
    for (const auto& [a, b] : matches[p]) errors.push_back(norm(gt[p].apply(a) - b));
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const auto correct = std::count_if(errors.begin(), errors.end(),
                                         [t = thresholds[k]](double e) { return e <= t; });
      result.values[k] += static_cast<double>(correct) / static_cast<double>(errors.size());
    }
  }
  for (double& v : result.values) v /= static_cast<double>(matches.size());
  return result;
}

double corner_error(const Homography& gt, const Homography& pred, std::size_t height,
                    std::size_t width) {
  const double w = static_cast<double>(width) - 1.0;
  const double h = static_cast<double>(height) - 1.0;
  const Point2 corners[] = {{0, 0}, {w, 0}, {0, h}, {w, h}};
  double total = 0.0;
  for (auto c : corners) total += norm(gt.apply(c) - pred.apply(c));
  return total / 4.0;
}

std::vector<double> ccm(std::span<const CcmPair> pairs, std::span<const double> thresholds) {
  if (pairs.empty()) throw InputError("ccm: no pairs");
  std::vector<double> errors;
  for (const auto& p : pairs) {
    errors.push_back(p.pred ? corner_error(p.gt, *p.pred, p.height, p.width) : INFINITY);
  }
  std::vector<double> out;
  for (double t : thresholds) {
    const auto ok =
        std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
    out.push_back(static_cast<double>(ok) / static_cast<double>(errors.size()));
  }
  return out;
}

}  // namespace slimmatch
