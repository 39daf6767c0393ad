#include "slimmatch/backbone.hpp"

#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

void BackboneConfig::validate() const {
  if (stem_width == 0 || coarse_channels == 0 || fine_channels == 0) {
    throw ConfigError("backbone widths must be positive");
  }
  for (auto w : stage_widths) {
    if (w == 0) throw ConfigError("backbone stage widths must be positive");
  }
}

std::vector<Point2> grid_keypoints(std::size_t height, std::size_t width, std::size_t stride) {
  if (stride == 0 || height % stride != 0 || width % stride != 0) {
    throw ShapeError("grid_keypoints: " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by stride " + std::to_string(stride));
  }
  const double offset = (static_cast<double>(stride) - 1.0) / 2.0;
  std::vector<Point2> pts;
  pts.reserve((height / stride) * (width / stride));
  for (std::size_t r = 0; r < height / stride; ++r) {
    for (std::size_t c = 0; c < width / stride; ++c) {
      pts.push_back({static_cast<double>(stride * c) + offset,
                     static_cast<double>(stride * r) + offset});
    }
  }
  return pts;
}

namespace {

ResidualBlock make_block(std::size_t in, std::size_t out, std::size_t stride, Rng& rng) {
  ResidualBlock b;
  b.stride = stride;
  b.conv1 = ConvLayer::standard(in, out, 3, rng);
  b.conv2 = ConvLayer::standard(out, out, 3, rng);
  // Keep the residual branch small at init so the stack starts near identity.
  for (double& v : b.conv2.weight.mutable_data()) v *= 0.5;
  if (in != out || stride != 1) b.shortcut = ConvLayer::standard(in, out, 1, rng);
  return b;
}

Tensor apply(const ConvLayer& layer, const Tensor& x, std::size_t stride = 1) {
  const std::size_t k = layer.weight.dim(2);
  return conv2d(x, layer.weight, layer.bias,
                {k == 1 ? ConvMode::pointwise : ConvMode::standard, stride, k / 2});
}

Tensor run_block(const ResidualBlock& b, const Tensor& x) {
  Tensor y = gelu(apply(b.conv1, x, b.stride));
  y = apply(b.conv2, y);
  Tensor skip = b.shortcut.weight.defined() ? apply(b.shortcut, x, b.stride) : x;
  return gelu(add(y, skip));
}

}  // namespace

BackboneParams BackboneParams::init(const BackboneConfig& cfg, Rng& rng) {
  cfg.validate();
  BackboneParams p;
  p.stem = ConvLayer::standard(1, cfg.stem_width, 3, rng);
  const std::array<std::size_t, 3> strides{1, 2, 2};
  std::size_t in = cfg.stem_width;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t out = cfg.stage_widths[s];
    p.stages[s][0] = make_block(in, out, strides[s], rng);
    p.stages[s][1] = make_block(out, out, 1, rng);
    in = out;
  }
  const auto& w = cfg.stage_widths;
  p.lateral3 = ConvLayer::standard(w[2], cfg.coarse_channels, 1, rng);
  p.lateral2 = ConvLayer::standard(w[1], w[1], 1, rng);
  p.lateral1 = ConvLayer::standard(w[0], cfg.fine_channels, 1, rng);
  p.topdown3 = ConvLayer::standard(cfg.coarse_channels, w[1], 1, rng);
  p.topdown2 = ConvLayer::standard(w[1], cfg.fine_channels, 1, rng);
  p.smooth2a = ConvLayer::standard(w[1], w[1], 3, rng);
  p.smooth2b = ConvLayer::standard(w[1], w[1], 3, rng);
  p.smooth1a = ConvLayer::standard(cfg.fine_channels, cfg.fine_channels, 3, rng);
  p.smooth1b = ConvLayer::standard(cfg.fine_channels, cfg.fine_channels, 3, rng);
  return p;
}

void BackboneParams::collect(ParamSet& set, const std::string& prefix) const {
  stem.collect(set, prefix + ".stem");
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t b = 0; b < 2; ++b) {
      const std::string name = prefix + ".stage" + std::to_string(s + 1) + "." + std::to_string(b);
      stages[s][b].conv1.collect(set, name + ".conv1");
      stages[s][b].conv2.collect(set, name + ".conv2");
      if (stages[s][b].shortcut.weight.defined()) {
        stages[s][b].shortcut.collect(set, name + ".shortcut");
      }
    }
  }
  lateral3.collect(set, prefix + ".lateral3");
  lateral2.collect(set, prefix + ".lateral2");
  lateral1.collect(set, prefix + ".lateral1");
  topdown3.collect(set, prefix + ".topdown3");
  topdown2.collect(set, prefix + ".topdown2");
  smooth2a.collect(set, prefix + ".smooth2a");
  smooth2b.collect(set, prefix + ".smooth2b");
  smooth1a.collect(set, prefix + ".smooth1a");
  smooth1b.collect(set, prefix + ".smooth1b");
}

FeaturePyramid extract_features(const Image& img, const BackboneConfig& cfg,
                                const BackboneParams& params) {
  if (img.height % kCoarseStride != 0 || img.width % kCoarseStride != 0) {
    const std::size_t ph = (kCoarseStride - img.height % kCoarseStride) % kCoarseStride;
    const std::size_t pw = (kCoarseStride - img.width % kCoarseStride) % kCoarseStride;
    throw ShapeError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " is not divisible by 8; pad by " + std::to_string(ph) + " rows and " +
                     std::to_string(pw) + " columns");
  }
  Tensor x = gelu(apply(params.stem, image_tensor(img), 2));  // H/2
  std::array<Tensor, 3> c;
  for (std::size_t s = 0; s < 3; ++s) {
    x = run_block(params.stages[s][0], x);
    x = run_block(params.stages[s][1], x);
    c[s] = x;  // strides 2, 4, 8
  }

  Tensor p3 = apply(params.lateral3, c[2]);
  Tensor p2 = add(apply(params.lateral2, c[1]), upsample_nearest2x(apply(params.topdown3, p3)));
  p2 = apply(params.smooth2b, gelu(apply(params.smooth2a, p2)));
  Tensor p1 = add(apply(params.lateral1, c[0]), upsample_nearest2x(apply(params.topdown2, p2)));
  p1 = apply(params.smooth1b, gelu(apply(params.smooth1a, p1)));

  FeaturePyramid out;
  out.coarse = p3;
  out.fine = p1;
  out.coarse_height = img.height / kCoarseStride;
  out.coarse_width = img.width / kCoarseStride;
  out.keypoints = grid_keypoints(img.height, img.width, kCoarseStride);
  if (out.coarse.dim(0) != cfg.coarse_channels || out.fine.dim(0) != cfg.fine_channels) {
    throw ConfigError("backbone parameters do not match the configured widths");
  }
  return out;
}

}  // namespace slimmatch
