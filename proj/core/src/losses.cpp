#include "slimmatch/losses.hpp"

#include <cmath>

#include "slimmatch/backbone.hpp"
#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

void LossWeights::validate() const {
  if (!(beta >= 0 && phi >= 0 && alpha > 0 && alpha < 1 && eta > 0 && psi > 0 && eps > 0 &&
        eps < 0.5)) {
    throw ConfigError("loss weights out of range");
  }
}

namespace {

// Coarse cell containing a pixel position, or -1 when outside the image.
long cell_of(Point2 p, std::size_t height, std::size_t width) {
  const double cx = std::floor((p.x + 0.5) / static_cast<double>(kCoarseStride));
  const double cy = std::floor((p.y + 0.5) / static_cast<double>(kCoarseStride));
  const double cols = static_cast<double>(width / kCoarseStride);
  const double rows = static_cast<double>(height / kCoarseStride);
  if (!(cx >= 0 && cx < cols && cy >= 0 && cy < rows)) return -1;
  return static_cast<long>(cy * cols + cx);
}

bool try_apply(const Homography& h, Point2 p, Point2& out) {
  try {
    out = h.apply(p);
  } catch (const GeometryError&) {
    return false;
  }
  return std::isfinite(out.x) && std::isfinite(out.y);
}

}  // namespace

std::vector<IndexPair> gt_coarse_labels(const Homography& h, std::size_t height_a,
                                        std::size_t width_a, std::size_t height_b,
                                        std::size_t width_b) {
  const auto centers_a = grid_keypoints(height_a, width_a);
  const auto centers_b = grid_keypoints(height_b, width_b);
  const Homography inv = h.inverse();
  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < centers_a.size(); ++i) {
    Point2 q;
    if (!try_apply(h, centers_a[i], q)) continue;
    const long j = cell_of(q, height_b, width_b);
    if (j < 0) continue;
    Point2 back;
    if (!try_apply(inv, centers_b[static_cast<std::size_t>(j)], back)) continue;
    if (cell_of(back, height_a, width_a) == static_cast<long>(i)) {
      out.push_back({i, static_cast<std::size_t>(j)});
    }
  }
  return out;
}

std::vector<IndexPair> gt_coarse_labels(const Homography& h, std::size_t height,
                                        std::size_t width) {
  return gt_coarse_labels(h, height, width, height, width);
}

std::size_t GroundTruthLabels::valid_count() const {
  std::size_t n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

void fill_fine_labels(GroundTruthLabels& labels, const Homography& h, const MatchSet& coarse,
                      double psi) {
  labels.offsets.clear();
  labels.confidence.clear();
  labels.valid.clear();
  for (const auto& m : coarse.matches) {
    Point2 q;
    const bool mapped = try_apply(h, m.a, q);
    const Point2 d = mapped ? q - m.b : Point2{0.0, 0.0};
    const bool ok = mapped && norm(d) <= psi;
    labels.offsets.push_back(d);
    labels.valid.push_back(ok);
    labels.confidence.push_back(ok ? 1.0 : 0.0);
  }
}

Tensor matching_loss(const Tensor& g, const std::vector<IndexPair>& positives,
                     const LossWeights& w) {
  if (g.rank() != 2) throw ShapeError("matching_loss: expected a matrix, got " + shape_str(g.shape()));
  if (positives.empty()) throw InputError("matching_loss: no ground-truth matches");
  const std::size_t rows = g.dim(0), cols = g.dim(1);
  std::vector<double> pos(rows * cols, 0.0);
  for (const auto& [i, j] : positives) {
    if (i >= rows || j >= cols) throw ShapeError("matching_loss: ground-truth index out of range");
    pos[i * cols + j] = 1.0;
  }
  std::size_t n_pos = 0;
  for (double v : pos) n_pos += v > 0 ? 1 : 0;
  std::vector<double> negatives(pos.size());
  for (std::size_t k = 0; k < pos.size(); ++k) negatives[k] = 1.0 - pos[k];

  const double neg_count = w.literal_negative_normalizer
                               ? static_cast<double>(rows) - static_cast<double>(n_pos)
                               : static_cast<double>(rows * cols - n_pos);
  Tensor gc = clamp(g, w.eps, 1.0 - w.eps);
  Tensor one_minus = add_scalar(neg(gc), 1.0);
  Tensor pos_terms = scale(mul(pow(one_minus, w.eta), log(gc)), w.alpha);
  Tensor neg_terms = scale(mul(pow(gc, w.eta), log(one_minus)), 1.0 - w.alpha);
  Tensor pos_mean =
      scale(sum(mul(pos_terms, Tensor::from_data(g.shape(), std::move(pos)))), 1.0 / n_pos);
  Tensor total = pos_mean;
  if (neg_count > 0) {
    Tensor neg_mean =
        scale(sum(mul(neg_terms, Tensor::from_data(g.shape(), std::move(negatives)))), 1.0 / neg_count);
    total = add(total, neg_mean);
  }
  return neg(total);
}

Tensor regression_loss(const Tensor& offset, const std::vector<Point2>& target,
                       const std::vector<bool>& valid, bool* no_valid) {
  const std::size_t k = target.size();
  if (valid.size() != k || offset.numel() != 2 * k) {
    throw ShapeError("regression_loss: " + shape_str(offset.shape()) + " offsets for " +
                     std::to_string(k) + " targets");
  }
  std::vector<double> gt(2 * k), mask(2 * k);
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < k; ++i) {
    gt[2 * i] = target[i].x;
    gt[2 * i + 1] = target[i].y;
    mask[2 * i] = mask[2 * i + 1] = valid[i] ? 1.0 : 0.0;
    n_valid += valid[i] ? 1 : 0;
  }
  if (no_valid) *no_valid = n_valid == 0;
  if (n_valid == 0) return Tensor::scalar(0.0);
  Tensor diff = sub(reshape(offset, {k, 2}), Tensor::from_data({k, 2}, std::move(gt)));
  Tensor masked = mul(square(diff), Tensor::from_data({k, 2}, std::move(mask)));
  return scale(sum(masked), 1.0 / static_cast<double>(n_valid));
}

Tensor classification_loss(const Tensor& confidence, const std::vector<double>& target,
                           double eps) {
  const std::size_t k = target.size();
  if (confidence.numel() != k) {
    throw ShapeError("classification_loss: " + shape_str(confidence.shape()) +
                     " confidences for " + std::to_string(k) + " targets");
  }
  if (k == 0) throw ShapeError("classification_loss: no entries");
  std::vector<double> y(target), not_y(k);
  for (std::size_t i = 0; i < k; ++i) not_y[i] = 1.0 - y[i];
  Tensor c = clamp(reshape(confidence, {k}), eps, 1.0 - eps);
  Tensor pos = mul(log(c), Tensor::from_data({k}, std::move(y)));
  Tensor negt = mul(log(add_scalar(neg(c), 1.0)), Tensor::from_data({k}, std::move(not_y)));
  return neg(mean(add(pos, negt)));
}

Tensor total_loss(const Tensor& matching, const Tensor& regression, const Tensor& classification,
                  const LossWeights& w) {
  return add(matching, add(scale(regression, w.beta), scale(classification, w.phi)));
}

}  // namespace slimmatch
