#include <algorithm>

#include "slimmatch/ops.hpp"

namespace slimmatch {

std::size_t conv_output_size(std::size_t input, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) throw ConfigError("convolution stride must be positive");
  if (kernel > input + 2 * padding) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(input + 2 * padding));
  }
  return (input + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w;
  std::size_t cout, k;
  std::size_t oh, ow;
  std::size_t stride, pad;
  bool depthwise;
};

// Valid output range [lo, hi) along one axis for kernel tap `tap`.
inline void valid_range(std::size_t out, std::size_t in, std::size_t tap, std::size_t stride,
                        std::size_t pad, std::size_t& lo, std::size_t& hi) {
  // input index = o*stride + tap - pad must lie in [0, in)
  lo = 0;
  if (tap < pad) lo = (pad - tap + stride - 1) / stride;
  if (in + pad <= tap) {
    hi = 0;
  } else {
    const std::size_t limit = in + pad - tap;  // o*stride < limit
    hi = std::min(out, (limit + stride - 1) / stride);
  }
  if (hi < lo) hi = lo;
}

// Accumulates out[oc] += w * in[ic] over one (oc, ic, ky, kx) tap.
template <class Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  const std::size_t groups_in = g.depthwise ? 1 : g.cin;
  for (std::size_t oc = 0; oc < g.cout; ++oc) {
    for (std::size_t j = 0; j < groups_in; ++j) {
      const std::size_t ic = g.depthwise ? oc : j;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        std::size_t ylo, yhi;
        valid_range(g.oh, g.h, ky, g.stride, g.pad, ylo, yhi);
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          std::size_t xlo, xhi;
          valid_range(g.ow, g.w, kx, g.stride, g.pad, xlo, xhi);
          const std::size_t widx = ((oc * groups_in + j) * g.k + ky) * g.k + kx;
          fn(oc, ic, ky, kx, widx, ylo, yhi, xlo, xhi);
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec) {
  if (x.rank() != 3) throw ShapeError("conv2d: input must be [C x H x W], got " + shape_str(x.shape()));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be [Cout x Cin x k x k], got " +
                     shape_str(weight.shape()));
  }
  ConvGeometry g{};
  g.cin = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.cout = weight.dim(0);
  g.k = weight.dim(2);
  g.stride = spec.stride;
  g.pad = spec.padding;
  g.depthwise = spec.mode == ConvMode::depthwise;

  switch (spec.mode) {
    case ConvMode::standard:
    case ConvMode::pointwise:
      if (weight.dim(1) != g.cin) {
        throw ShapeError("conv2d: weight " + shape_str(weight.shape()) +
                         " does not match input channels of " + shape_str(x.shape()));
      }
      if (spec.mode == ConvMode::pointwise && g.k != 1) {
        throw ShapeError("conv2d: pointwise mode needs a 1x1 kernel, got " +
                         shape_str(weight.shape()));
      }
      break;
    case ConvMode::depthwise:
      if (weight.dim(1) != 1 || weight.dim(0) != g.cin) {
        throw ShapeError("conv2d: depthwise weight " + shape_str(weight.shape()) +
                         " must be [C x 1 x k x k] for input " + shape_str(x.shape()));
      }
      break;
  }
  if (bias.defined() && bias.numel() != g.cout) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(g.cout) + " output channels");
  }
  g.oh = conv_output_size(g.h, g.k, g.stride, g.pad);
  g.ow = conv_output_size(g.w, g.k, g.stride, g.pad);

  std::vector<double> out(g.cout * g.oh * g.ow, 0.0);
  auto xv = x.data();
  auto wv = weight.data();
  if (bias.defined()) {
    auto bv = bias.data();
    for (std::size_t oc = 0; oc < g.cout; ++oc)
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(oc * g.oh * g.ow), g.oh * g.ow, bv[oc]);
  }
  for_each_tap(g, [&](std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx,
                      std::size_t widx, std::size_t ylo, std::size_t yhi, std::size_t xlo,
                      std::size_t xhi) {
    const double wk = wv[widx];
    for (std::size_t oy = ylo; oy < yhi; ++oy) {
      const std::size_t iy = oy * g.stride + ky - g.pad;
      const double* in_row = xv.data() + (ic * g.h + iy) * g.w;
      double* out_row = out.data() + (oc * g.oh + oy) * g.ow;
      for (std::size_t ox = xlo; ox < xhi; ++ox) {
        out_row[ox] += wk * in_row[ox * g.stride + kx - g.pad];
      }
    }
  });

  const std::size_t taps_per_output = (g.depthwise ? 1 : g.cin) * g.k * g.k;
  record_macs("conv2d", static_cast<std::uint64_t>(g.cout) * g.oh * g.ow * taps_per_output);

  return Tensor::make_op(
      {g.cout, g.oh, g.ow}, std::move(out), {x, weight, bias},
      [x, weight, g](std::span<const double>, std::span<const double> go,
                     std::span<double* const> grads) {
        auto xv = x.data();
        auto wv = weight.data();
        double* gx = grads[0];
        double* gw = grads[1];
        double* gb = grads.size() > 2 ? grads[2] : nullptr;
        if (gb) {
          for (std::size_t oc = 0; oc < g.cout; ++oc) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.oh * g.ow; ++i) acc += go[oc * g.oh * g.ow + i];
            gb[oc] += acc;
          }
        }
        if (!gx && !gw) return;
        for_each_tap(g, [&](std::size_t oc, std::size_t ic, std::size_t ky, std::size_t kx,
                            std::size_t widx, std::size_t ylo, std::size_t yhi, std::size_t xlo,
                            std::size_t xhi) {
          const double wk = wv[widx];
          double wacc = 0.0;
          for (std::size_t oy = ylo; oy < yhi; ++oy) {
            const std::size_t iy = oy * g.stride + ky - g.pad;
            const double* g_row = go.data() + (oc * g.oh + oy) * g.ow;
            const std::size_t in_off = (ic * g.h + iy) * g.w;
            for (std::size_t ox = xlo; ox < xhi; ++ox) {
              const std::size_t ix = ox * g.stride + kx - g.pad;
              if (gx) gx[in_off + ix] += wk * g_row[ox];
              wacc += xv[in_off + ix] * g_row[ox];
            }
          }
          if (gw) gw[widx] += wacc;
        });
      });
}

}  // namespace slimmatch
