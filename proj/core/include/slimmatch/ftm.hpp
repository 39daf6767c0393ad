#pragma once

#include <array>
#include <string>

#include "slimmatch/params.hpp"

namespace slimmatch {

inline constexpr std::array<std::size_t, 4> kFtmKernels{1, 3, 5, 7};

// Feature transition: four depthwise branches (kernel 1, 3, 5, 7), each
// squeezed to C/4 channels by a 1x1 convolution, concatenated in that order.
struct FtmParams {
  std::array<ConvLayer, 4> depthwise;
  std::array<ConvLayer, 4> pointwise;

  static FtmParams init(std::size_t channels, Rng& rng);
  void collect(ParamSet& set, const std::string& prefix) const;
};

// [C x h x w] -> [C x h x w]; C must be divisible by 4.
Tensor feature_transition(const Tensor& coarse, const FtmParams& params);

}  // namespace slimmatch
