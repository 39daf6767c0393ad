#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slimmatch/params.hpp"

namespace slimmatch {

// Integer grid position of a token: x is the column, y the row.
struct GridCoord {
  int x = 0;
  int y = 0;
  bool operator==(const GridCoord&) const = default;
};

struct TokenSeq {
  Tensor tokens;  // [N x C]
  std::vector<GridCoord> coords;
};

// Row-major coordinates of an h x w grid.
std::vector<GridCoord> grid_coords(std::size_t height, std::size_t width);

// Flattens [C x h x w] to an [h*w x C] sequence with matching coordinates.
TokenSeq tokens_from_map(const Tensor& map);
// Inverse of tokens_from_map.
Tensor map_from_tokens(const Tensor& tokens, std::size_t height, std::size_t width);

enum class PositionMode {
  relative,  // rotary encoding of Q and K inside every layer
  absolute,  // fixed sinusoidal encoding added once before the first layer
  none,
};

struct AttentionOptions {
  PositionMode position = PositionMode::relative;
  std::size_t heads = 1;
};

// Rotation frequencies for one axis. Channels split into an x half and a y
// half; each half of size C' holds C'/2 rotation pairs with
// theta_k = 10000^(-2(k-1)/C').
class RopeTable {
 public:
  explicit RopeTable(std::size_t channels);
  std::size_t channels() const { return channels_; }
  const std::vector<double>& thetas() const { return thetas_; }

 private:
  std::size_t channels_;
  std::vector<double> thetas_;
};

// Applies the 2-D rotary encoding to every row of x [N x C].
Tensor rope_encode(const Tensor& x, std::span<const GridCoord> coords, const RopeTable& table);

// Fixed sinusoidal encoding [N x C] (sin/cos of x and y interleaved in groups
// of four channels).
Tensor sinusoidal_encoding(std::span<const GridCoord> coords, std::size_t channels);

struct SlimParams {
  std::size_t channels = 0;
  std::size_t hidden = 0;  // gamma * channels
  Tensor wq, wk, wv;       // [C x C]
  Tensor query_score;      // [C x heads]
  Tensor key_score;        // [C x heads]
  LinearLayer message;     // C -> C
  LinearLayer ffn_in;      // 2C -> gamma*C
  LinearLayer ffn_out;     // gamma*C -> C
  Tensor layer_scale;      // scalar

  // `layer_scale_trainable == false` pins the scale at 1.
  static SlimParams init(std::size_t channels, std::size_t gamma, Rng& rng, std::size_t heads = 1,
                         double layer_scale = 0.1, bool layer_scale_trainable = true);
  void collect(ParamSet& set, const std::string& prefix) const;
};

// Intermediates of one vector attention call, for inspection in tests.
struct VectorAttentionTrace {
  Tensor query;          // Q after position encoding
  Tensor key;            // K after position encoding
  Tensor query_weights;  // [N_U x heads], columns sum to 1
  Tensor global_query;   // [1 x C]
  Tensor context_key;    // global query (*) K, [N_R x C]
  Tensor key_weights;    // [N_R x heads]
  Tensor global_key;     // [1 x C]
};

// Additive attention of U over R with linear cost in the token count.
// N_R must equal N_U, or be 1 (the single key row then broadcasts).
Tensor vector_attention(const TokenSeq& u, const TokenSeq& r, const SlimParams& p,
                        const AttentionOptions& opt, VectorAttentionTrace* trace = nullptr);

// Two-layer GELU MLP over [U || M]: 2C -> gamma*C -> C.
Tensor ffn(const Tensor& u, const Tensor& m, const SlimParams& p);

// U + xi * FFN(U, VAtt(U, R)); coordinates carried over from U.
TokenSeq slim_layer(const TokenSeq& u, const TokenSeq& r, const SlimParams& p,
                    const AttentionOptions& opt);

struct InterleaveLayer {
  SlimParams self_a, self_b, cross_a, cross_b;

  static InterleaveLayer init(std::size_t channels, std::size_t gamma, Rng& rng,
                              const AttentionOptions& opt, double layer_scale = 0.1,
                              bool layer_scale_trainable = true);
  void collect(ParamSet& set, const std::string& prefix) const;
};

inline constexpr std::size_t kDeepMatcherLayers = 6;
inline constexpr std::size_t kDeepMatcherLargeLayers = 10;

// Per layer: self(A), self(B), cross(A <- B), cross(B <- updated A).
std::pair<TokenSeq, TokenSeq> interleave(TokenSeq a, TokenSeq b,
                                         std::span<const InterleaveLayer> layers,
                                         std::size_t num_layers, const AttentionOptions& opt);

}  // namespace slimmatch
