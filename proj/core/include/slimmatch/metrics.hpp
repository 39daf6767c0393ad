#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slimmatch/geometry.hpp"

namespace slimmatch {

// Area under the empirical error CDF on [0, t], divided by t, for each
// threshold. The step CDF is integrated exactly.
std::vector<double> auc_at_thresholds(std::span<const double> errors_deg,
                                      std::span<const double> thresholds);

// Correspondences of one image pair: (point in A, point in B).
using PointPairs = std::vector<std::pair<Point2, Point2>>;

struct MmaResult {
  std::vector<double> values;            // one per threshold
  std::vector<std::size_t> empty_pairs;  // pairs that had no matches (scored 0)
};

// Mean over pairs of the fraction of matches with ||H(a) - b|| <= t.
MmaResult mma(std::span<const PointPairs> matches, std::span<const Homography> gt,
              std::span<const double> thresholds);

// Mean displacement of the four image corners between two homographies.
double corner_error(const Homography& gt, const Homography& pred, std::size_t height,
                    std::size_t width);

struct CcmPair {
  Homography gt;
  std::optional<Homography> pred;  // empty when estimation failed
  std::size_t height = 0;
  std::size_t width = 0;
};

// Fraction of pairs whose corner error is <= t, per threshold. Pairs without
// an estimate count as failures.
std::vector<double> ccm(std::span<const CcmPair> pairs, std::span<const double> thresholds);

inline constexpr double kAucThresholds[] = {5.0, 10.0, 20.0};
inline constexpr double kCcmThresholds[] = {1.0, 3.0, 5.0};
inline constexpr double kMmaThresholds[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

}  // namespace slimmatch
