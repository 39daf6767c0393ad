#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "slimmatch/geometry.hpp"
#include "slimmatch/slimformer.hpp"

namespace slimmatch {

inline constexpr double kDefaultMatchThreshold = 0.2;
inline constexpr std::size_t kDefaultWindow = 5;
inline constexpr double kDefaultConfidenceGate = 0.5;

// S = FA * FB^T, divided by sqrt(C) unless `scaled` is false.
Tensor score_matrix(const Tensor& fa, const Tensor& fb, bool scaled = true);

// Column softmax times row softmax, elementwise.
Tensor dual_softmax(const Tensor& s);

struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;
  bool operator==(const IndexPair&) const = default;
  auto operator<=>(const IndexPair&) const = default;
};

enum class MatchLevel { coarse, fine };

struct Match {
  Point2 a;
  Point2 b;
  double confidence = 0.0;
};

struct MatchSet {
  MatchLevel level = MatchLevel::coarse;
  std::vector<Match> matches;
  std::vector<IndexPair> indices;  // token indices, coarse level only

  std::size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
};

// Mutual nearest neighbours of G (strict row and column maxima) above
// `threshold`, in row order. Exact ties produce no match.
std::vector<IndexPair> mutual_nearest(const std::vector<double>& g, std::size_t rows,
                                      std::size_t cols, double threshold);

MatchSet extract_coarse_matches(const Tensor& g, double threshold, const std::vector<Point2>& pa,
                                const std::vector<Point2>& pb);

// Fine-grid cell nearest to a pixel position; ties round toward +infinity.
long fine_cell(double pixel);

struct FineWindows {
  std::size_t size = kDefaultWindow;
  std::vector<Tensor> a;  // K crops [C x w x w]
  std::vector<Tensor> b;
  std::size_t count() const { return a.size(); }
};

FineWindows crop_fine_windows(const MatchSet& coarse, const Tensor& fine_a, const Tensor& fine_b,
                              std::size_t window = kDefaultWindow);

struct FineHeadParams {
  ConvLayer reduce1;  // 2C -> C
  ConvLayer reduce2;  // C -> C
  ConvLayer post1;    // C -> C, after pooling
  ConvLayer post2;    // C -> C
  ConvLayer confidence;  // C -> 1
  ConvLayer offset;      // C -> 2

  static FineHeadParams init(std::size_t channels, Rng& rng);
  void collect(ParamSet& set, const std::string& prefix) const;
};

struct FineOutput {
  Tensor offset;      // [K x 2], pixels
  Tensor confidence;  // [K x 1]
};

// Window tokens pass through the fine interleave, then the per-window head.
FineOutput fine_refine(const FineWindows& windows, const std::vector<InterleaveLayer>& layers,
                       const FineHeadParams& head, const AttentionOptions& opt);

// P_B shifted by the predicted offsets; matches with confidence below `gate`
// are dropped.
MatchSet assemble_fine_matches(const MatchSet& coarse, const Tensor& offset,
                               const Tensor& confidence, double gate = kDefaultConfidenceGate);

}  // namespace slimmatch
