#include "slimmatch/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace slimmatch {

namespace {

// How operand indices map onto the output index.
enum class Broadcast { same, scalar, row };

struct BinaryLayout {
  Shape out_shape;
  Broadcast a_mode = Broadcast::same;
  Broadcast b_mode = Broadcast::same;
  std::size_t row_len = 1;
};

bool is_row_of(const Tensor& small, const Tensor& big) {
  if (big.rank() < 1 || small.rank() < 1) return false;
  const std::size_t cols = big.shape().back();
  if (small.numel() != cols || small.shape().back() != cols) return false;
  for (std::size_t i = 0; i + 1 < small.rank(); ++i) {
    if (small.shape()[i] != 1) return false;
  }
  return true;
}

BinaryLayout binary_layout(const Tensor& a, const Tensor& b, const char* op) {
  BinaryLayout layout;
  if (a.shape() == b.shape()) {
    layout.out_shape = a.shape();
    return layout;
  }
  if (b.numel() == 1) {
    layout.out_shape = a.shape();
    layout.b_mode = Broadcast::scalar;
    return layout;
  }
  if (a.numel() == 1) {
    layout.out_shape = b.shape();
    layout.a_mode = Broadcast::scalar;
    return layout;
  }
  if (is_row_of(b, a)) {
    layout.out_shape = a.shape();
    layout.b_mode = Broadcast::row;
    layout.row_len = b.numel();
    return layout;
  }
  if (is_row_of(a, b)) {
    layout.out_shape = b.shape();
    layout.a_mode = Broadcast::row;
    layout.row_len = a.numel();
    return layout;
  }
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

inline std::size_t operand_index(Broadcast mode, std::size_t i, std::size_t row_len) {
  switch (mode) {
    case Broadcast::same:
      return i;
    case Broadcast::scalar:
      return 0;
    case Broadcast::row:
      return i % row_len;
  }
  return i;
}

// Forward value f(a, b) and partials (da, db) per element.
template <class F, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, DA dfa, DB dfb) {
  BinaryLayout layout = binary_layout(a, b, name);
  const std::size_t n = shape_numel(layout.out_shape);
  std::vector<double> out(n);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(av[operand_index(layout.a_mode, i, layout.row_len)],
               bv[operand_index(layout.b_mode, i, layout.row_len)]);
  }
  return Tensor::make_op(
      layout.out_shape, std::move(out), {a, b},
      [a, b, layout, dfa, dfb](std::span<const double>, std::span<const double> g,
                               std::span<double* const> grads) {
        auto av = a.data();
        auto bv = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const std::size_t ia = operand_index(layout.a_mode, i, layout.row_len);
          const std::size_t ib = operand_index(layout.b_mode, i, layout.row_len);
          if (grads[0]) grads[0][ia] += g[i] * dfa(av[ia], bv[ib]);
          if (grads[1]) grads[1][ib] += g[i] * dfb(av[ia], bv[ib]);
        }
      });
}

// Unary op whose derivative is expressed from input x and output y.
template <class F, class DF>
Tensor unary_op(const Tensor& x, F f, DF df) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return Tensor::make_op(x.shape(), std::move(out), {x},
                         [x, df](std::span<const double> y, std::span<const double> g,
                                 std::span<double* const> grads) {
                           auto xv = x.data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             grads[0][i] += g[i] * df(xv[i], y[i]);
                           }
                         });
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  record_macs("matmul", static_cast<std::uint64_t>(m) * n * k);
  return Tensor::make_op(
      {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](std::span<const double>, std::span<const double> g,
                      std::span<double* const> grads) {
        auto av = a.data();
        auto bv = b.data();
        if (grads[0]) {
          // dA = G B^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = bv.data() + p * n;
              const double* grow = g.data() + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              grads[0][i * k + p] += acc;
            }
          }
        }
        if (grads[1]) {
          // dB = A^T G
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double s = av[i * k + p];
              double* drow = grads[1] + p * n;
              for (std::size_t j = 0; j < n; ++j) drow[j] += s * grow[j];
            }
          }
        }
      });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  return Tensor::make_op({c, r}, std::move(out), {a},
                         [r, c](std::span<const double>, std::span<const double> g,
                                std::span<double* const> grads) {
                           for (std::size_t i = 0; i < r; ++i)
                             for (std::size_t j = 0; j < c; ++j)
                               grads[0][i * c + j] += g[j * r + i];
                         });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t len = s[axis];
  if (len == 0) throw ShapeError("softmax: empty axis in shape " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  return Tensor::make_op(s, std::move(out), {x},
                         [outer, inner, len](std::span<const double> y, std::span<const double> g,
                                             std::span<double* const> grads) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t in = 0; in < inner; ++in) {
                               const std::size_t base = o * len * inner + in;
                               double dot = 0.0;
                               for (std::size_t k = 0; k < len; ++k) {
                                 dot += g[base + k * inner] * y[base + k * inner];
                               }
                               for (std::size_t k = 0; k < len; ++k) {
                                 const std::size_t idx = base + k * inner;
                                 grads[0][idx] += y[idx] * (g[idx] - dot);
                               }
                             }
                           }
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tensor out = binary_op(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
  record_macs("elementwise_mul", out.numel());
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary_op(
      x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary_op(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor log(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor pow(const Tensor& x, double exponent) {
  return unary_op(
      x, [exponent](double v) { return std::pow(v, exponent); },
      [exponent](double v, double) {
        if (exponent == 0.0) return 0.0;
        return exponent * std::pow(v, exponent - 1.0);
      });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary_op(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_op({}, {total}, {x},
                         [n = x.numel()](std::span<const double>, std::span<const double> g,
                                         std::span<double* const> grads) {
                           for (std::size_t i = 0; i < n; ++i) grads[0][i] += g[0];
                         });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_op(std::move(shape), std::move(out), {x},
                         [](std::span<const double>, std::span<const double> g,
                            std::span<double* const> grads) {
                           for (std::size_t i = 0; i < g.size(); ++i) grads[0][i] += g[i];
                         });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  const std::size_t out_axis = out_shape[axis];
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t len = p.shape()[axis];
    auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * len * inner), len * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * out_axis + offset) * inner));
    }
    offset += len;
  }
  std::vector<std::size_t> lens;
  for (const auto& p : parts) lens.push_back(p.shape()[axis]);
  return Tensor::make_op(
      std::move(out_shape), std::move(out), parts,
      [outer, inner, out_axis, offsets, lens](std::span<const double>, std::span<const double> g,
                                              std::span<double* const> grads) {
        for (std::size_t k = 0; k < grads.size(); ++k) {
          if (!grads[k]) continue;
          const std::size_t len = lens[k];
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = g.data() + (o * out_axis + offsets[k]) * inner;
            double* dst = grads[k] + o * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = end - begin, full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<double> out(outer * len * inner);
  auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * full + begin) * inner), len * inner,
                out.begin() + static_cast<std::ptrdiff_t>(o * len * inner));
  }
  return Tensor::make_op(std::move(out_shape), std::move(out), {x},
                         [outer, inner, len, full, begin](std::span<const double>,
                                                          std::span<const double> g,
                                                          std::span<double* const> grads) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             const double* src = g.data() + o * len * inner;
                             double* dst = grads[0] + (o * full + begin) * inner;
                             for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                           }
                         });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<double> out(rows.size() * c);
  auto xv = x.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       shape_str(x.shape()));
    }
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[r] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(r * c));
  }
  return Tensor::make_op({rows.size(), c}, std::move(out), {x},
                         [rows, c](std::span<const double>, std::span<const double> g,
                                   std::span<double* const> grads) {
                           for (std::size_t r = 0; r < rows.size(); ++r) {
                             for (std::size_t j = 0; j < c; ++j) {
                               grads[0][rows[r] * c + j] += g[r * c + j];
                             }
                           }
                         });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor y = matmul(x, w);
  if (bias.defined()) y = add(y, bias);
  return y;
}

Tensor max_pool_global(const Tensor& x) {
  require_rank(x, 3, "max_pool_global");
  const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
  if (hw == 0) throw ShapeError("max_pool_global: empty spatial extent " + shape_str(x.shape()));
  auto xv = x.data();
  std::vector<double> out(c);
  std::vector<std::size_t> argmax(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* p = xv.data() + ch * hw;
    std::size_t best = 0;
    for (std::size_t i = 1; i < hw; ++i) {
      if (p[i] > p[best]) best = i;
    }
    argmax[ch] = ch * hw + best;
    out[ch] = p[best];
  }
  return Tensor::make_op({c, 1, 1}, std::move(out), {x},
                         [argmax](std::span<const double>, std::span<const double> g,
                                  std::span<double* const> grads) {
                           for (std::size_t ch = 0; ch < argmax.size(); ++ch) {
                             grads[0][argmax[ch]] += g[ch];
                           }
                         });
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_rank(x, 3, "upsample_nearest2x");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = 2 * h, ow = 2 * w;
  auto xv = x.data();
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        out[(ch * oh + y) * ow + xx] = xv[(ch * h + y / 2) * w + xx / 2];
  return Tensor::make_op({c, oh, ow}, std::move(out), {x},
                         [c, h, w, oh, ow](std::span<const double>, std::span<const double> g,
                                           std::span<double* const> grads) {
                           for (std::size_t ch = 0; ch < c; ++ch)
                             for (std::size_t y = 0; y < oh; ++y)
                               for (std::size_t xx = 0; xx < ow; ++xx)
                                 grads[0][(ch * h + y / 2) * w + xx / 2] +=
                                     g[(ch * oh + y) * ow + xx];
                         });
}

Tensor crop_window(const Tensor& x, long top, long left, std::size_t size) {
  require_rank(x, 3, "crop_window");
  const std::size_t c = x.dim(0);
  const long h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
  const long s = static_cast<long>(size);
  auto xv = x.data();
  std::vector<double> out(c * size * size, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (long dy = 0; dy < s; ++dy) {
      const long y = top + dy;
      if (y < 0 || y >= h) continue;
      for (long dx = 0; dx < s; ++dx) {
        const long xx = left + dx;
        if (xx < 0 || xx >= w) continue;
        out[(ch * size + static_cast<std::size_t>(dy)) * size + static_cast<std::size_t>(dx)] =
            xv[(ch * static_cast<std::size_t>(h) + static_cast<std::size_t>(y)) *
                   static_cast<std::size_t>(w) +
               static_cast<std::size_t>(xx)];
      }
    }
  }
  return Tensor::make_op(
      {c, size, size}, std::move(out), {x},
      [c, h, w, s, top, left, size](std::span<const double>, std::span<const double> g,
                                    std::span<double* const> grads) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (long dy = 0; dy < s; ++dy) {
            const long y = top + dy;
            if (y < 0 || y >= h) continue;
            for (long dx = 0; dx < s; ++dx) {
              const long xx = left + dx;
              if (xx < 0 || xx >= w) continue;
              grads[0][(ch * static_cast<std::size_t>(h) + static_cast<std::size_t>(y)) *
                           static_cast<std::size_t>(w) +
                       static_cast<std::size_t>(xx)] +=
                  g[(ch * size + static_cast<std::size_t>(dy)) * size +
                    static_cast<std::size_t>(dx)];
            }
          }
        }
      });
}

}  // namespace slimmatch
