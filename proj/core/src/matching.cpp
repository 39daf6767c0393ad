#include "slimmatch/matching.hpp"

#include <cmath>

#include "slimmatch/backbone.hpp"
#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

Tensor score_matrix(const Tensor& fa, const Tensor& fb, bool scaled) {
  if (fa.rank() != 2 || fb.rank() != 2 || fa.dim(1) != fb.dim(1)) {
    throw ShapeError("score_matrix: descriptor shapes " + shape_str(fa.shape()) + " and " +
                     shape_str(fb.shape()) + " are incompatible");
  }
  Tensor s = matmul(fa, transpose(fb));
  if (!scaled) return s;
  return scale(s, 1.0 / std::sqrt(static_cast<double>(fa.dim(1))));
}

Tensor dual_softmax(const Tensor& s) {
  if (s.rank() != 2) throw ShapeError("dual_softmax: expected a matrix, got " + shape_str(s.shape()));
  return mul(softmax(s, 0), softmax(s, 1));
}

std::vector<IndexPair> mutual_nearest(const std::vector<double>& g, std::size_t rows,
                                      std::size_t cols, double threshold) {
  if (g.size() != rows * cols) throw ShapeError("mutual_nearest: size mismatch");
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  // Strict argmax per row and per column; `none` when the maximum is tied.
  std::vector<std::size_t> row_best(rows, none), col_best(cols, none);
  for (std::size_t i = 0; i < rows; ++i) {
    double best = -INFINITY;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = g[i * cols + j];
      if (v > best) {
        best = v;
        row_best[i] = j;
      } else if (v == best) {
        row_best[i] = none;
      }
    }
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double best = -INFINITY;
    for (std::size_t i = 0; i < rows; ++i) {
      const double v = g[i * cols + j];
      if (v > best) {
        best = v;
        col_best[j] = i;
      } else if (v == best) {
        col_best[j] = none;
      }
    }
  }
  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t j = row_best[i];
    if (j != none && col_best[j] == i && g[i * cols + j] > threshold) out.push_back({i, j});
  }
  return out;
}

MatchSet extract_coarse_matches(const Tensor& g, double threshold, const std::vector<Point2>& pa,
                                const std::vector<Point2>& pb) {
  if (g.rank() != 2 || g.dim(0) != pa.size() || g.dim(1) != pb.size()) {
    throw ShapeError("extract_coarse_matches: assignment " + shape_str(g.shape()) +
                     " does not match " + std::to_string(pa.size()) + " and " +
                     std::to_string(pb.size()) + " keypoints");
  }
  auto gv = g.data();
  const std::vector<double> values(gv.begin(), gv.end());
  MatchSet out;
  out.level = MatchLevel::coarse;
  out.indices = mutual_nearest(values, g.dim(0), g.dim(1), threshold);
  for (const auto& [i, j] : out.indices) {
    out.matches.push_back({pa[i], pb[j], values[i * g.dim(1) + j]});
  }
  return out;
}

long fine_cell(double pixel) {
  return static_cast<long>(std::floor(pixel / static_cast<double>(kFineStride) + 0.5));
}

FineWindows crop_fine_windows(const MatchSet& coarse, const Tensor& fine_a, const Tensor& fine_b,
                              std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("fine window size must be odd, got " + std::to_string(window));
  }
  if (fine_a.rank() != 3 || fine_b.rank() != 3 || fine_a.dim(0) != fine_b.dim(0)) {
    throw ShapeError("crop_fine_windows: fine maps " + shape_str(fine_a.shape()) + " and " +
                     shape_str(fine_b.shape()) + " are incompatible");
  }
  const long half = static_cast<long>(window / 2);
  FineWindows out;
  out.size = window;
  for (const auto& m : coarse.matches) {
    out.a.push_back(crop_window(fine_a, fine_cell(m.a.y) - half, fine_cell(m.a.x) - half, window));
    out.b.push_back(crop_window(fine_b, fine_cell(m.b.y) - half, fine_cell(m.b.x) - half, window));
  }
  return out;
}

FineHeadParams FineHeadParams::init(std::size_t channels, Rng& rng) {
  FineHeadParams p;
  p.reduce1 = ConvLayer::standard(2 * channels, channels, 1, rng);
  p.reduce2 = ConvLayer::standard(channels, channels, 1, rng);
  p.post1 = ConvLayer::standard(channels, channels, 1, rng);
  p.post2 = ConvLayer::standard(channels, channels, 1, rng);
  p.confidence = ConvLayer::standard(channels, 1, 1, rng);
  p.offset = ConvLayer::standard(channels, 2, 1, rng);
  // Start from zero offsets and confidence 0.5.
  for (double& v : p.confidence.weight.mutable_data()) v = 0.0;
  for (double& v : p.offset.weight.mutable_data()) v = 0.0;
  return p;
}

void FineHeadParams::collect(ParamSet& set, const std::string& prefix) const {
  reduce1.collect(set, prefix + ".reduce1");
  reduce2.collect(set, prefix + ".reduce2");
  post1.collect(set, prefix + ".post1");
  post2.collect(set, prefix + ".post2");
  confidence.collect(set, prefix + ".confidence");
  offset.collect(set, prefix + ".offset");
}

namespace {

Tensor pointwise(const ConvLayer& layer, const Tensor& x) {
  return conv2d(x, layer.weight, layer.bias, {ConvMode::pointwise, 1, 0});
}

}  // namespace

FineOutput fine_refine(const FineWindows& windows, const std::vector<InterleaveLayer>& layers,
                       const FineHeadParams& head, const AttentionOptions& opt) {
  const std::size_t k = windows.count();
  if (k == 0) throw ShapeError("fine_refine: no windows to refine");
  if (windows.b.size() != k) throw ShapeError("fine_refine: unpaired windows");
  const std::size_t w = windows.size;

  std::vector<Tensor> offsets, confidences;
  offsets.reserve(k);
  confidences.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    TokenSeq ta = tokens_from_map(windows.a[n]);
    TokenSeq tb = tokens_from_map(windows.b[n]);
    auto [oa, ob] = interleave(std::move(ta), std::move(tb), layers, layers.size(), opt);
    Tensor x = concat({map_from_tokens(oa.tokens, w, w), map_from_tokens(ob.tokens, w, w)}, 0);
    x = gelu(pointwise(head.reduce1, x));
    x = gelu(pointwise(head.reduce2, x));
    x = max_pool_global(x);
    x = gelu(pointwise(head.post1, x));
    x = gelu(pointwise(head.post2, x));
    confidences.push_back(reshape(sigmoid(pointwise(head.confidence, x)), {1, 1}));
    offsets.push_back(reshape(pointwise(head.offset, x), {1, 2}));
  }
  return {concat(offsets, 0), concat(confidences, 0)};
}

MatchSet assemble_fine_matches(const MatchSet& coarse, const Tensor& offset,
                               const Tensor& confidence, double gate) {
  const std::size_t k = coarse.size();
  MatchSet out;
  out.level = MatchLevel::fine;
  if (k == 0) return out;
  if (offset.numel() != 2 * k || confidence.numel() != k) {
    throw ShapeError("assemble_fine_matches: " + std::to_string(k) + " coarse matches but offsets " +
                     shape_str(offset.shape()) + " and confidences " +
                     shape_str(confidence.shape()));
  }
  auto dv = offset.data();
  auto cv = confidence.data();
  for (std::size_t i = 0; i < k; ++i) {
    if (cv[i] < gate) continue;
    const Match& m = coarse.matches[i];
    out.matches.push_back({m.a, {m.b.x + dv[2 * i], m.b.y + dv[2 * i + 1]}, cv[i]});
  }
  return out;
}

}  // namespace slimmatch
