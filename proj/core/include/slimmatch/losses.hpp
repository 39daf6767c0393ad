#pragma once

#include <cstddef>
#include <vector>

#include "slimmatch/geometry.hpp"
#include "slimmatch/matching.hpp"

namespace slimmatch {

struct LossWeights {
  double beta = 0.2;   // regression weight
  double phi = 0.2;    // classification weight
  double alpha = 0.25;
  double eta = 2.0;
  double psi = 8.0;    // offsets longer than this (pixels) are not supervised
  double eps = 1e-8;
  // Normalize the negative focal term by N - |E| (rows minus positives)
  // instead of the number of negative entries.
  bool literal_negative_normalizer = false;

  void validate() const;
};

// Coarse cells (i in A, j in B) linked by the homography: the center of i maps
// inside cell j of B, and the center of j maps back inside cell i.
std::vector<IndexPair> gt_coarse_labels(const Homography& h, std::size_t height_a,
                                        std::size_t width_a, std::size_t height_b,
                                        std::size_t width_b);
std::vector<IndexPair> gt_coarse_labels(const Homography& h, std::size_t height,
                                        std::size_t width);

struct GroundTruthLabels {
  std::vector<IndexPair> coarse;    // E_gt
  std::vector<Point2> offsets;      // per refined match: H(P_A) - P_B
  std::vector<double> confidence;   // 1 where the offset is within psi
  std::vector<bool> valid;

  std::size_t valid_count() const;
};

// Offset and confidence targets for the refined matches in `coarse`.
void fill_fine_labels(GroundTruthLabels& labels, const Homography& h, const MatchSet& coarse,
                      double psi);

// Focal loss over the assignment matrix; throws when `positives` is empty.
Tensor matching_loss(const Tensor& g, const std::vector<IndexPair>& positives,
                     const LossWeights& w = {});

// Mean squared offset error over valid entries. Returns an untracked zero and
// sets `no_valid` when nothing is valid.
Tensor regression_loss(const Tensor& offset, const std::vector<Point2>& target,
                       const std::vector<bool>& valid, bool* no_valid = nullptr);

// Mean binary cross-entropy with eps clamping.
Tensor classification_loss(const Tensor& confidence, const std::vector<double>& target,
                           double eps = 1e-8);

Tensor total_loss(const Tensor& matching, const Tensor& regression, const Tensor& classification,
                  const LossWeights& w = {});

}  // namespace slimmatch
