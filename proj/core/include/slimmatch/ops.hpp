#pragma once

#include <cstddef>
#include <vector>

#include "slimmatch/tensor.hpp"

namespace slimmatch {

// Matrix product of [m x k] and [k x n]; records m*n*k MACs under "matmul".
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Numerically stable softmax along `axis` (max subtracted before exp).
Tensor softmax(const Tensor& x, std::size_t axis);

// Binary elementwise ops. Shapes must match, or one operand is a scalar or a
// single row whose length equals the other operand's last dimension.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);
Tensor neg(const Tensor& x);

// Exact erf-based GELU.
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
// x^p for x > 0 (or any x when p is a non-negative integer).
Tensor pow(const Tensor& x, double exponent);
// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
// Rows of a 2-D tensor selected by index (repeats allowed).
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);

// x [N x in] times w [in x out] plus optional bias [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});

enum class ConvMode { standard, depthwise, pointwise };

struct ConvSpec {
  ConvMode mode = ConvMode::standard;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation of x [C_in x H x W] with zero padding.
//   standard:  weight [C_out x C_in x k x k]
//   depthwise: weight [C x 1 x k x k]
//   pointwise: weight [C_out x C_in x 1 x 1]
// bias, when defined, has C_out entries.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec);

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

// [C x h x w] -> [C x 1 x 1]; ties route the gradient to the first maximum.
Tensor max_pool_global(const Tensor& x);
// [C x H x W] -> [C x 2H x 2W], nearest neighbour.
Tensor upsample_nearest2x(const Tensor& x);
// w x w window of x [C x H x W] whose top-left cell is (top, left); cells
// outside the map read as zero.
Tensor crop_window(const Tensor& x, long top, long left, std::size_t size);

}  // namespace slimmatch
