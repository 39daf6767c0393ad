#include "slimmatch/ftm.hpp"

#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

FtmParams FtmParams::init(std::size_t channels, Rng& rng) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("FTM needs a channel count divisible by 4, got " + std::to_string(channels));
  }
  FtmParams p;
  for (std::size_t b = 0; b < 4; ++b) {
    p.depthwise[b] = ConvLayer::depthwise(channels, kFtmKernels[b], rng);
    p.pointwise[b] = ConvLayer::standard(channels, channels / 4, 1, rng);
  }
  return p;
}

void FtmParams::collect(ParamSet& set, const std::string& prefix) const {
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string k = std::to_string(kFtmKernels[b]);
    depthwise[b].collect(set, prefix + ".dw" + k);
    pointwise[b].collect(set, prefix + ".pw" + k);
  }
}

Tensor feature_transition(const Tensor& coarse, const FtmParams& params) {
  if (coarse.rank() != 3) {
    throw ShapeError("feature_transition: expected [C x h x w], got " + shape_str(coarse.shape()));
  }
  const std::size_t c = coarse.dim(0);
  if (c % 4 != 0) {
    throw ConfigError("feature_transition: channel count " + std::to_string(c) +
                      " is not divisible by 4");
  }
  std::vector<Tensor> branches;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::size_t k = kFtmKernels[b];
    Tensor d = conv2d(coarse, params.depthwise[b].weight, params.depthwise[b].bias,
                      {ConvMode::depthwise, 1, (k - 1) / 2});
    branches.push_back(conv2d(d, params.pointwise[b].weight, params.pointwise[b].bias,
                              {ConvMode::pointwise, 1, 0}));
  }
  return concat(branches, 0);
}

}  // namespace slimmatch
