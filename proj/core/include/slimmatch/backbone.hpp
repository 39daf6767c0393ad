#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "slimmatch/geometry.hpp"
#include "slimmatch/image.hpp"
#include "slimmatch/params.hpp"

namespace slimmatch {

inline constexpr std::size_t kCoarseStride = 8;
inline constexpr std::size_t kFineStride = 2;

struct BackboneConfig {
  std::size_t stem_width = 96;
  std::array<std::size_t, 3> stage_widths{96, 128, 192};
  std::size_t coarse_channels = 192;
  std::size_t fine_channels = 96;

  static BackboneConfig full() { return {}; }
  static BackboneConfig tiny() { return {8, {8, 12, 16}, 16, 8}; }
  void validate() const;
};

// Two 3x3 convolutions with a residual connection; `shortcut` is present when
// the block changes width or resolution.
struct ResidualBlock {
  ConvLayer conv1;
  ConvLayer conv2;
  ConvLayer shortcut;  // undefined tensors when identity
  std::size_t stride = 1;
};

struct BackboneParams {
  ConvLayer stem;
  std::array<std::array<ResidualBlock, 2>, 3> stages;
  // Top-down pyramid: lateral 1x1 projections, 1x1 width adapters on the
  // upsampled path, and 3x3 smoothing pairs.
  ConvLayer lateral3, lateral2, lateral1;
  ConvLayer topdown3, topdown2;
  ConvLayer smooth2a, smooth2b, smooth1a, smooth1b;

  static BackboneParams init(const BackboneConfig& cfg, Rng& rng);
  void collect(ParamSet& set, const std::string& prefix) const;
};

struct FeaturePyramid {
  Tensor coarse;  // [C_coarse x H/8 x W/8]
  Tensor fine;    // [C_fine x H/2 x W/2]
  std::vector<Point2> keypoints;  // coarse cell centers, row-major
  std::size_t coarse_height = 0;
  std::size_t coarse_width = 0;
};

// Cell centers x = stride*c + (stride-1)/2, y = stride*r + (stride-1)/2, row-major.
std::vector<Point2> grid_keypoints(std::size_t height, std::size_t width,
                                   std::size_t stride = kCoarseStride);

FeaturePyramid extract_features(const Image& img, const BackboneConfig& cfg,
                                const BackboneParams& params);

}  // namespace slimmatch
