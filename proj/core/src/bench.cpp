#include "slimmatch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

std::string attention_kind_name(AttentionKind k) {
  return k == AttentionKind::vector ? "vector" : "vanilla";
}

AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "vector") return AttentionKind::vector;
  if (s == "vanilla") return AttentionKind::vanilla;
  throw ConfigError("unknown attention kind '" + s + "' (vector, vanilla)");
}

VanillaParams VanillaParams::init(std::size_t channels, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(channels));
  return {init_normal({channels, channels}, s, rng), init_normal({channels, channels}, s, rng),
          init_normal({channels, channels}, s, rng), init_normal({channels, channels}, s, rng)};
}

Tensor vanilla_attention(const Tensor& u, const Tensor& r, const VanillaParams& p) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(u.dim(1)));
  Tensor q = matmul(u, p.wq);
  Tensor k = matmul(r, p.wk);
  Tensor v = matmul(r, p.wv);
  Tensor attn = softmax(scale(matmul(q, transpose(k)), inv_sqrt), 1);
  return matmul(matmul(attn, v), p.wo);
}

AttentionWorkload AttentionWorkload::make(AttentionKind kind, std::size_t n, std::size_t channels,
                                          std::uint64_t seed) {
  if (n == 0) throw ConfigError("benchmark token count must be positive");
  Rng rng(seed);
  AttentionWorkload w;
  w.kind = kind;
  std::vector<double> data(n * channels);
  for (double& v : data) v = rng.normal();
  w.tokens.tokens = Tensor::from_data({n, channels}, std::move(data));
  constexpr std::size_t grid_width = 64;
  for (std::size_t i = 0; i < n; ++i) {
    w.tokens.coords.push_back({static_cast<int>(i % grid_width), static_cast<int>(i / grid_width)});
  }
  if (kind == AttentionKind::vector) {
    w.slim = SlimParams::init(channels, 4, rng);
  } else {
    w.vanilla = VanillaParams::init(channels, rng);
  }
  return w;
}

Tensor AttentionWorkload::run() const {
  NoGradGuard no_grad;
  if (kind == AttentionKind::vector) return slim_layer(tokens, tokens, slim, AttentionOptions{}).tokens;
  return vanilla_attention(tokens.tokens, tokens.tokens, vanilla);
}

std::uint64_t attention_macs(AttentionKind kind, std::size_t n, std::size_t channels) {
  const auto w = AttentionWorkload::make(kind, n, channels);
  FlopLedger ledger;
  {
    FlopRecording rec(ledger);
    w.run();
  }
  return ledger.total();
}

double attention_seconds(AttentionKind kind, std::size_t n, std::size_t channels,
                         std::size_t repeats) {
  if (repeats == 0) throw ConfigError("benchmark repeats must be positive");
  const auto w = AttentionWorkload::make(kind, n, channels);
  w.run();  // warm-up
  std::vector<double> times;
  for (std::size_t k = 0; k < repeats; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Tensor out = w.run();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

std::vector<BenchRow> bench_attention_scaling(std::span<const std::size_t> ns, std::size_t channels,
                                              std::span<const AttentionKind> kinds,
                                              std::size_t repeats) {
  if (!std::is_sorted(ns.begin(), ns.end())) throw ConfigError("token counts must be ascending");
  std::vector<BenchRow> rows;
  for (AttentionKind kind : kinds) {
    for (std::size_t n : ns) {
      rows.push_back({attention_kind_name(kind), n, attention_macs(kind, n, channels),
                      attention_seconds(kind, n, channels, repeats)});
    }
  }
  return rows;
}

std::vector<std::string> check_scaling(const std::vector<BenchRow>& rows) {
  std::vector<std::string> problems;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& prev = rows[k - 1];
    const auto& cur = rows[k];
    if (prev.kind != cur.kind || cur.n != 2 * prev.n || prev.macs == 0) continue;
    const double ratio = static_cast<double>(cur.macs) / static_cast<double>(prev.macs);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: MACs(%zu)/MACs(%zu) = %.6f", cur.kind.c_str(), cur.n,
                  prev.n, ratio);
    if (cur.kind == "vector" && cur.macs != 2 * prev.macs) {
      problems.push_back(std::string(buf) + ", expected exactly 2");
    } else if (cur.kind == "vanilla" && !(ratio > 3.5 && ratio <= 4.0)) {
      problems.push_back(std::string(buf) + ", expected (3.5, 4]");
    }
  }
  return problems;
}

std::string format_bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "kind,N,macs,seconds\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%llu,%.9g\n", r.kind.c_str(), r.n,
                  static_cast<unsigned long long>(r.macs), r.seconds);
    out += buf;
  }
  return out;
}

std::vector<BenchRow> parse_bench_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "kind,N,macs,seconds") {
    throw InputError("benchmark CSV must start with 'kind,N,macs,seconds'");
  }
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    BenchRow r;
    std::string n, macs, secs;
    if (!std::getline(fields, r.kind, ',') || !std::getline(fields, n, ',') ||
        !std::getline(fields, macs, ',') || !std::getline(fields, secs)) {
      throw InputError("benchmark CSV: malformed line '" + line + "'");
    }
    try {
      r.n = std::stoull(n);
      r.macs = std::stoull(macs);
      r.seconds = std::stod(secs);
    } catch (const std::exception&) {
      throw InputError("benchmark CSV: malformed line '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace slimmatch
