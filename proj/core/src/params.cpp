#include "slimmatch/params.hpp"

#include <cmath>

namespace slimmatch {

void ParamSet::add(std::string name, const Tensor& tensor) {
  entries_.push_back({std::move(name), tensor});
}

Tensor ParamSet::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  return {};
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& e : entries_) {
    for (double g : e.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = stddev * rng.normal();
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

Tensor init_zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }

ConvLayer ConvLayer::standard(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
  const double fan_in = static_cast<double>(in * kernel * kernel);
  return {init_normal({out, in, kernel, kernel}, std::sqrt(2.0 / fan_in), rng), init_zeros({out})};
}

ConvLayer ConvLayer::depthwise(std::size_t channels, std::size_t kernel, Rng& rng) {
  const double fan_in = static_cast<double>(kernel * kernel);
  return {init_normal({channels, 1, kernel, kernel}, std::sqrt(2.0 / fan_in), rng),
          init_zeros({channels})};
}

void ConvLayer::collect(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  set.add(prefix + ".bias", bias);
}

LinearLayer LinearLayer::init(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  LinearLayer layer;
  layer.weight = init_normal({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (with_bias) layer.bias = init_zeros({out});
  return layer;
}

void LinearLayer::collect(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".weight", weight);
  if (bias.defined()) set.add(prefix + ".bias", bias);
}

}  // namespace slimmatch
