#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "slimmatch/rng.hpp"
#include "slimmatch/tensor.hpp"

namespace slimmatch {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Ordered view over the trainable tensors of a model. Entries share storage
// with the tensors they were registered from.
class ParamSet {
 public:
  void add(std::string name, const Tensor& tensor);
  const std::vector<NamedParam>& entries() const { return entries_; }
  // Undefined tensor when no entry has that name.
  Tensor find(std::string_view name) const;
  std::size_t numel() const;
  void zero_grad();
  double grad_norm() const;

 private:
  std::vector<NamedParam> entries_;
};

// Zero-mean normal init with the given standard deviation, trainable.
Tensor init_normal(Shape shape, double stddev, Rng& rng);
Tensor init_zeros(Shape shape);

// 1x1 or kxk convolution with bias.
struct ConvLayer {
  Tensor weight;
  Tensor bias;

  static ConvLayer standard(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
  static ConvLayer depthwise(std::size_t channels, std::size_t kernel, Rng& rng);
  void collect(ParamSet& set, const std::string& prefix) const;
};

// Dense layer: weight [in x out], bias [out].
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  static LinearLayer init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  void collect(ParamSet& set, const std::string& prefix) const;
};

}  // namespace slimmatch
