#include "slimmatch/slimformer.hpp"

#include <cmath>

#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

std::vector<GridCoord> grid_coords(std::size_t height, std::size_t width) {
  std::vector<GridCoord> coords;
  coords.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      coords.push_back({static_cast<int>(c), static_cast<int>(r)});
  return coords;
}

TokenSeq tokens_from_map(const Tensor& map) {
  if (map.rank() != 3) throw ShapeError("tokens_from_map: expected [C x h x w], got " + shape_str(map.shape()));
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  return {transpose(reshape(map, {c, h * w})), grid_coords(h, w)};
}

Tensor map_from_tokens(const Tensor& tokens, std::size_t height, std::size_t width) {
  if (tokens.rank() != 2 || tokens.dim(0) != height * width) {
    throw ShapeError("map_from_tokens: " + shape_str(tokens.shape()) + " is not " +
                     std::to_string(height) + "x" + std::to_string(width) + " tokens");
  }
  return reshape(transpose(tokens), {tokens.dim(1), height, width});
}

RopeTable::RopeTable(std::size_t channels) : channels_(channels) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("rotary encoding needs channels divisible by 4, got " +
                      std::to_string(channels));
  }
  const std::size_t half = channels / 2;
  for (std::size_t k = 0; k < half / 2; ++k) {
    thetas_.push_back(std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(half)));
  }
}

Tensor rope_encode(const Tensor& x, std::span<const GridCoord> coords, const RopeTable& table) {
  if (x.rank() != 2 || x.dim(1) != table.channels()) {
    throw ShapeError("rope_encode: tokens " + shape_str(x.shape()) + " do not have " +
                     std::to_string(table.channels()) + " channels");
  }
  const std::size_t n = x.dim(0), c = x.dim(1), half = c / 2;
  if (coords.size() != n) throw ShapeError("rope_encode: one coordinate per token required");

  // cos/sin per token, axis and pair: [n][2][half/2]
  const auto& thetas = table.thetas();
  const std::size_t pairs = thetas.size();
  std::vector<double> cs(n * 2 * pairs), sn(n * 2 * pairs);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos[2] = {static_cast<double>(coords[i].x), static_cast<double>(coords[i].y)};
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t k = 0; k < pairs; ++k) {
        const double angle = pos[a] * thetas[k];
        cs[(i * 2 + a) * pairs + k] = std::cos(angle);
        sn[(i * 2 + a) * pairs + k] = std::sin(angle);
      }
    }
  }
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t k = 0; k < pairs; ++k) {
        const std::size_t ch = i * c + a * half + 2 * k;
        const double co = cs[(i * 2 + a) * pairs + k], si = sn[(i * 2 + a) * pairs + k];
        out[ch] = co * xv[ch] - si * xv[ch + 1];
        out[ch + 1] = si * xv[ch] + co * xv[ch + 1];
      }
    }
  }
  record_macs("rope", static_cast<std::uint64_t>(2) * n * c);
  return Tensor::make_op(
      x.shape(), std::move(out), {x},
      [n, c, half, pairs, cs = std::move(cs), sn = std::move(sn)](
          std::span<const double>, std::span<const double> g, std::span<double* const> grads) {
        // Transpose of each 2x2 rotation.
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t a = 0; a < 2; ++a) {
            for (std::size_t k = 0; k < pairs; ++k) {
              const std::size_t ch = i * c + a * half + 2 * k;
              const double co = cs[(i * 2 + a) * pairs + k], si = sn[(i * 2 + a) * pairs + k];
              grads[0][ch] += co * g[ch] + si * g[ch + 1];
              grads[0][ch + 1] += -si * g[ch] + co * g[ch + 1];
            }
          }
        }
      });
}

Tensor sinusoidal_encoding(std::span<const GridCoord> coords, std::size_t channels) {
  if (channels == 0 || channels % 4 != 0) {
    throw ConfigError("sinusoidal encoding needs channels divisible by 4");
  }
  const std::size_t groups = channels / 4;
  std::vector<double> pe(coords.size() * channels);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(2 * g) / static_cast<double>(channels / 2));
      double* row = pe.data() + i * channels + 4 * g;
      row[0] = std::sin(coords[i].x * freq);
      row[1] = std::cos(coords[i].x * freq);
      row[2] = std::sin(coords[i].y * freq);
      row[3] = std::cos(coords[i].y * freq);
    }
  }
  return Tensor::from_data({coords.size(), channels}, std::move(pe));
}

SlimParams SlimParams::init(std::size_t channels, std::size_t gamma, Rng& rng, std::size_t heads,
                            double layer_scale, bool layer_scale_trainable) {
  if (channels == 0 || heads == 0 || channels % heads != 0) {
    throw ConfigError("SlimFormer channels must be a positive multiple of the head count");
  }
  if (gamma == 0) throw ConfigError("FFN scale rate must be positive");
  SlimParams p;
  p.channels = channels;
  p.hidden = gamma * channels;
  const double s = 1.0 / std::sqrt(static_cast<double>(channels));
  p.wq = init_normal({channels, channels}, s, rng);
  p.wk = init_normal({channels, channels}, s, rng);
  p.wv = init_normal({channels, channels}, s, rng);
  p.query_score = init_normal({channels, heads}, s, rng);
  p.key_score = init_normal({channels, heads}, s, rng);
  p.message = LinearLayer::init(channels, channels, rng);
  p.ffn_in = LinearLayer::init(2 * channels, p.hidden, rng);
  p.ffn_out = LinearLayer::init(p.hidden, channels, rng);
  p.layer_scale = layer_scale_trainable ? Tensor::scalar(layer_scale, true) : Tensor::scalar(1.0, false);
  return p;
}

void SlimParams::collect(ParamSet& set, const std::string& prefix) const {
  set.add(prefix + ".wq", wq);
  set.add(prefix + ".wk", wk);
  set.add(prefix + ".wv", wv);
  set.add(prefix + ".query_score", query_score);
  set.add(prefix + ".key_score", key_score);
  message.collect(set, prefix + ".message");
  ffn_in.collect(set, prefix + ".ffn_in");
  ffn_out.collect(set, prefix + ".ffn_out");
  set.add(prefix + ".layer_scale", layer_scale);
}

namespace {

// Softmax-weighted sum of rows, per head: weights [N x h], x [N x C] -> [1 x C].
Tensor pool_rows(const Tensor& weights, const Tensor& x, std::size_t heads) {
  if (heads == 1) return matmul(transpose(weights), x);
  const std::size_t dh = x.dim(1) / heads;
  std::vector<Tensor> parts;
  for (std::size_t h = 0; h < heads; ++h) {
    parts.push_back(matmul(transpose(slice(weights, 1, h, h + 1)), slice(x, 1, h * dh, (h + 1) * dh)));
  }
  return concat(parts, 1);
}

}  // namespace

Tensor vector_attention(const TokenSeq& u, const TokenSeq& r, const SlimParams& p,
                        const AttentionOptions& opt, VectorAttentionTrace* trace) {
  const Tensor& ut = u.tokens;
  const Tensor& rt = r.tokens;
  if (ut.rank() != 2 || rt.rank() != 2 || ut.dim(1) != p.channels || rt.dim(1) != p.channels) {
    throw ShapeError("vector_attention: token shapes " + shape_str(ut.shape()) + " and " +
                     shape_str(rt.shape()) + " do not match " + std::to_string(p.channels) +
                     " channels");
  }
  const std::size_t nu = ut.dim(0), nr = rt.dim(0);
  if (nu == 0 || nr == 0) throw ShapeError("vector_attention: empty token sequence");
  if (nr != nu && nr != 1) {
    throw ShapeError("vector_attention: key sequence of " + std::to_string(nr) +
                     " tokens cannot attend from " + std::to_string(nu) + " queries");
  }
  const std::size_t heads = p.query_score.dim(1);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.channels / heads));

  Tensor q = matmul(ut, p.wq);
  Tensor k = matmul(rt, p.wk);
  Tensor v = matmul(rt, p.wv);
  if (opt.position == PositionMode::relative) {
    const RopeTable table(p.channels);
    q = rope_encode(q, u.coords, table);
    k = rope_encode(k, r.coords, table);
  }

  Tensor q_weights = softmax(scale(matmul(q, p.query_score), inv_sqrt), 0);
  Tensor global_q = pool_rows(q_weights, q, heads);
  Tensor context_k = mul(k, global_q);
  Tensor k_weights = softmax(scale(matmul(context_k, p.key_score), inv_sqrt), 0);
  Tensor global_k = pool_rows(k_weights, context_k, heads);
  Tensor lambda = mul(v, global_k);
  Tensor m = add(linear(lambda, p.message.weight, p.message.bias), q);

  if (trace != nullptr) {
    *trace = {q, k, q_weights, global_q, context_k, k_weights, global_k};
  }
  return m;
}

Tensor ffn(const Tensor& u, const Tensor& m, const SlimParams& p) {
  if (u.shape() != m.shape()) {
    throw ShapeError("ffn: shapes " + shape_str(u.shape()) + " and " + shape_str(m.shape()) +
                     " differ");
  }
  Tensor h = gelu(linear(concat({u, m}, 1), p.ffn_in.weight, p.ffn_in.bias));
  return linear(h, p.ffn_out.weight, p.ffn_out.bias);
}

TokenSeq slim_layer(const TokenSeq& u, const TokenSeq& r, const SlimParams& p,
                    const AttentionOptions& opt) {
  Tensor message = vector_attention(u, r, p, opt);
  Tensor update = mul(p.layer_scale, ffn(u.tokens, message, p));
  return {add(u.tokens, update), u.coords};
}

InterleaveLayer InterleaveLayer::init(std::size_t channels, std::size_t gamma, Rng& rng,
                                      const AttentionOptions& opt, double layer_scale,
                                      bool layer_scale_trainable) {
  InterleaveLayer l;
  l.self_a = SlimParams::init(channels, gamma, rng, opt.heads, layer_scale, layer_scale_trainable);
  l.self_b = SlimParams::init(channels, gamma, rng, opt.heads, layer_scale, layer_scale_trainable);
  l.cross_a = SlimParams::init(channels, gamma, rng, opt.heads, layer_scale, layer_scale_trainable);
  l.cross_b = SlimParams::init(channels, gamma, rng, opt.heads, layer_scale, layer_scale_trainable);
  return l;
}

void InterleaveLayer::collect(ParamSet& set, const std::string& prefix) const {
  self_a.collect(set, prefix + ".self_a");
  self_b.collect(set, prefix + ".self_b");
  cross_a.collect(set, prefix + ".cross_a");
  cross_b.collect(set, prefix + ".cross_b");
}

std::pair<TokenSeq, TokenSeq> interleave(TokenSeq a, TokenSeq b,
                                         std::span<const InterleaveLayer> layers,
                                         std::size_t num_layers, const AttentionOptions& opt) {
  if (num_layers == 0) throw ConfigError("interleave needs at least one layer");
  if (layers.size() != num_layers) {
    throw ConfigError("interleave: " + std::to_string(layers.size()) +
                      " parameter sets for " + std::to_string(num_layers) + " layers");
  }
  if (opt.position == PositionMode::absolute) {
    const std::size_t c = a.tokens.dim(1);
    a.tokens = add(a.tokens, sinusoidal_encoding(a.coords, c));
    b.tokens = add(b.tokens, sinusoidal_encoding(b.coords, c));
  }
  for (const auto& layer : layers) {
    a = slim_layer(a, a, layer.self_a, opt);
    b = slim_layer(b, b, layer.self_b, opt);
    TokenSeq a_next = slim_layer(a, b, layer.cross_a, opt);
    b = slim_layer(b, a_next, layer.cross_b, opt);
    a = std::move(a_next);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace slimmatch
