#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slimmatch/slimformer.hpp"

namespace slimmatch {

enum class AttentionKind { vector, vanilla };

std::string attention_kind_name(AttentionKind k);
AttentionKind parse_attention_kind(const std::string& s);

// Weights of the softmax attention reference: Q, K, V and output projections.
struct VanillaParams {
  Tensor wq, wk, wv, wo;
  static VanillaParams init(std::size_t channels, Rng& rng);
};

// softmax(Q K^T / sqrt(C)) V followed by the output projection.
Tensor vanilla_attention(const Tensor& u, const Tensor& r, const VanillaParams& p);

// Self-attention workload of N tokens laid out on a grid 64 tokens wide.
struct AttentionWorkload {
  AttentionKind kind;
  TokenSeq tokens;
  SlimParams slim;
  VanillaParams vanilla;

  static AttentionWorkload make(AttentionKind kind, std::size_t n, std::size_t channels,
                                std::uint64_t seed = 0);
  // One layer forward without gradient recording.
  Tensor run() const;
};

// MACs of one layer forward from the ledger.
std::uint64_t attention_macs(AttentionKind kind, std::size_t n, std::size_t channels);
// Median wall time of `repeats` forward passes.
double attention_seconds(AttentionKind kind, std::size_t n, std::size_t channels,
                         std::size_t repeats = 20);

struct BenchRow {
  std::string kind;
  std::size_t n = 0;
  std::uint64_t macs = 0;
  double seconds = 0.0;
  bool operator==(const BenchRow&) const = default;
};

std::vector<BenchRow> bench_attention_scaling(std::span<const std::size_t> ns, std::size_t channels,
                                              std::span<const AttentionKind> kinds,
                                              std::size_t repeats = 20);

// Checks MAC ratios between consecutive sizes that double: vector exactly 2,
// vanilla in (3.5, 4]. Returns one message per violation.
std::vector<std::string> check_scaling(const std::vector<BenchRow>& rows);

std::string format_bench_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> parse_bench_csv(const std::string& text);

}  // namespace slimmatch
