#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "slimmatch/bench.hpp"
#include "slimmatch/commands.hpp"
#include "slimmatch/gradcheck.hpp"
#include "slimmatch/losses.hpp"
#include "slimmatch/matching.hpp"
#include "slimmatch/metrics.hpp"
#include "slimmatch/model.hpp"
#include "slimmatch/ops.hpp"
#include "slimmatch/rng.hpp"
#include "slimmatch/slimformer.hpp"
#include "slimmatch/synthetic.hpp"
#include "slimmatch/train.hpp"

using namespace slimmatch;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kTrainPairs = 200;
constexpr std::size_t kHeldOutPairs = 50;
constexpr std::size_t kImageSize = 64;
constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kHeldOutSeed = 2;

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d %-22s %s  %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void rope_identities() {
  const auto t0 = Clock::now();
  Rng rng(11);
  const std::size_t c = 32;
  const RopeTable table(c);
  double norm_err = 0, rel_err = 0;
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> f(c), g(c);
    for (auto& v : f) v = rng.normal();
    for (auto& v : g) v = rng.normal();
    const GridCoord i{static_cast<int>(rng.below(64)), static_cast<int>(rng.below(64))};
    const GridCoord j{static_cast<int>(rng.below(64)), static_cast<int>(rng.below(64))};
    const GridCoord d{j.x - i.x, j.y - i.y};
    const Tensor ft = Tensor::from_data({1, c}, f), gt = Tensor::from_data({1, c}, g);
    const Tensor fi = rope_encode(ft, std::vector{i}, table);
    const Tensor gj = rope_encode(gt, std::vector{j}, table);
    const Tensor gd = rope_encode(gt, std::vector{d}, table);
    double n0 = 0, n1 = 0, lhs = 0, rhs = 0;
    for (std::size_t k = 0; k < c; ++k) {
      n0 += f[k] * f[k];
      n1 += fi[k] * fi[k];
      lhs += fi[k] * gj[k];
      rhs += f[k] * gd[k];
    }
    norm_err = std::max(norm_err, std::abs(std::sqrt(n0) - std::sqrt(n1)));
    rel_err = std::max(rel_err, std::abs(lhs - rhs));
  }
  const double t = seconds_since(t0);
  report(1, "rope-identities", norm_err <= 1e-12 && rel_err <= 1e-10 && t < 5,
         "norm " + fmt("%.2e", norm_err) + " relative " + fmt("%.2e", rel_err) + " time " + fmt("%.2fs", t));
}

void gradient_integrity() {
  const auto t0 = Clock::now();
  ModelConfig cfg = ModelConfig::tiny();
  cfg.seed = 3;
  const Model m = Model::init(cfg);
  const PlanarScene s = make_pair(32, 32, 21);
  // The fine stage sees a fixed selection so the loss is smooth in every parameter.
  const std::vector<IndexPair> selection = s.labels.coarse;
  auto f = [&] { return training_loss(m, s.image_a, s.image_b, s.h, selection).total; };

  // Central differences resolve about 1e-16 * |L| / step; coordinates whose
  // gradient is far below that are not sampled. Every tensor contributes its
  // largest-gradient coordinate, then random coordinates fill up the sample.
  ParamSet params = m.parameters();
  params.zero_grad();
  backward(f());
  std::vector<ParamCoord> coords;
  std::vector<ParamCoord> pool;
  constexpr double kMinGrad = 1e-5;
  for (const auto& e : params.entries()) {
    if (!e.tensor.requires_grad() || !e.tensor.has_grad()) continue;
    auto g = e.tensor.grad();
    std::size_t best = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (std::abs(g[k]) > std::abs(g[best])) best = k;
      if (std::abs(g[k]) >= kMinGrad) pool.push_back({e.tensor, k});
    }
    if (std::abs(g[best]) >= kMinGrad) coords.push_back({e.tensor, best});
  }
  const std::size_t tensors = coords.size();
  Rng rng(5);
  for (int k = 0; k < 40 && !pool.empty(); ++k) coords.push_back(pool[rng.below(pool.size())]);
  const GradCheckReport r = finite_diff_check(f, coords, 1e-5);
  const double t = seconds_since(t0);
  report(2, "gradient-integrity", coords.size() >= 20 && r.max_rel_error < 1e-4 && t < 120,
         std::to_string(coords.size()) + " coordinates over " + std::to_string(tensors) + " tensors, max rel " + fmt("%.2e", r.max_rel_error) + " time " +
             fmt("%.1fs", t));
}

void complexity() {
  const std::size_t c = 64;
  const std::uint64_t v256 = attention_macs(AttentionKind::vector, 256, c);
  const std::uint64_t v512 = attention_macs(AttentionKind::vector, 512, c);
  const std::uint64_t v1024 = attention_macs(AttentionKind::vector, 1024, c);
  const bool linear = v512 == 2 * v256 && v1024 == 2 * v512;
  const double vanilla = static_cast<double>(attention_macs(AttentionKind::vanilla, 1024, c)) /
                         static_cast<double>(attention_macs(AttentionKind::vanilla, 512, c));
  const double wall = attention_seconds(AttentionKind::vector, 8192, c, 5) /
                      attention_seconds(AttentionKind::vector, 4096, c, 5);
  const bool wall_ok = wall >= 1.6 && wall <= 2.8;
  report(3, "complexity", linear && vanilla > 3.5 && vanilla <= 4.0,
         std::string("vector MACs ") + (linear ? "exactly linear" : "NOT linear") + ", vanilla ratio " +
             fmt("%.4f", vanilla) + ", wall ratio 8192/4096 " + fmt("%.3f", wall) +
             (wall_ok ? " (soft bound met)" : " (soft bound missed)"));
}

void matching_oracle() {
  Rng rng(7);
  std::size_t mismatches = 0;
  std::vector<Point2> pts(8);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> g(64);
    for (auto& v : g) v = trial % 4 == 0 ? std::round(rng.uniform() * 6) / 6 : rng.uniform();
    const double lambda = rng.uniform(0.0, 0.5);
    std::vector<IndexPair> want;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        bool best = g[i * 8 + j] > lambda;
        for (std::size_t k = 0; k < 8 && best; ++k) {
          if (k != j && g[i * 8 + k] >= g[i * 8 + j]) best = false;
          if (k != i && g[k * 8 + j] >= g[i * 8 + j]) best = false;
        }
        if (best) want.push_back({i, j});
      }
    const MatchSet got = extract_coarse_matches(Tensor::from_data({8, 8}, g), lambda, pts, pts);
    if (got.indices != want) ++mismatches;
  }
  double ds_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(36);
    for (auto& v : s) v = 3 * rng.normal();
    const Tensor g = dual_softmax(Tensor::from_data({6, 6}, s));
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        double row = 0, col = 0;
        for (std::size_t k = 0; k < 6; ++k) {
          row += std::exp(s[i * 6 + k]);
          col += std::exp(s[k * 6 + j]);
        }
        const double e = std::exp(s[i * 6 + j]);
        ds_err = std::max(ds_err, std::abs(g[i * 6 + j] - (e / row) * (e / col)));
      }
  }
  report(4, "matching-oracle", mismatches == 0 && ds_err <= 1e-12,
         std::to_string(mismatches) + "/1000 MNN mismatches, dual-softmax err " + fmt("%.2e", ds_err));
}

void geometry_oracles() {
  Rng rng(9);
  double dlt_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Homography h = sample_homography(rng.next_u64(), HomographyLimits{}, 64, 64);
    std::vector<std::pair<Point2, Point2>> pairs;
    for (int k = 0; k < 8; ++k) {
      const Point2 p{rng.uniform(0, 63), rng.uniform(0, 63)};
      const auto& mm = h.matrix();
      const double w = mm(2, 0) * p.x + mm(2, 1) * p.y + mm(2, 2);
      pairs.push_back({p, {(mm(0, 0) * p.x + mm(0, 1) * p.y + mm(0, 2)) / w,
                           (mm(1, 0) * p.x + mm(1, 1) * p.y + mm(1, 2)) / w}});
    }
    dlt_err = std::max(dlt_err, homography_distance(homography_dlt(pairs), h));
  }
  const Eigen::Matrix3d eye = Eigen::Matrix3d::Identity();
  const Eigen::Vector3d t(0.2, -0.5, 1.0);
  const double rot = pose_error(eye, t, rotation_about_axis({0, 0, 1}, std::numbers::pi / 2), t).rotation_deg;
  const double anti = pose_error(eye, t, eye, -t).translation_deg;
  const double pose_err = std::max(std::abs(rot - 90.0), std::abs(anti - 180.0));
  const double auc = auc_at_thresholds(std::vector<double>{10.0}, std::vector<double>{20.0})[0];
  report(5, "geometry-oracles", dlt_err <= 1e-8 && pose_err <= 1e-9 && auc == 0.5,
         "DLT " + fmt("%.2e", dlt_err) + ", pose " + fmt("%.2e", pose_err) + ", AUC@20 " + fmt("%.6f", auc));
}

void loss_values() {
  const double lm = matching_loss(Tensor::full({2, 2}, 0.25), {{0, 0}}).item();
  const double lr = regression_loss(Tensor::zeros({1, 2}), {{3, 4}}, {true}).item();
  const double lc = classification_loss(Tensor::full({3, 1}, 0.5), {1, 0, 1}).item();
  report(6, "loss-values", std::abs(lm - 0.2084) <= 1e-3 && lr == 25.0 && std::abs(lc - std::log(2.0)) <= 1e-12,
         "matching " + fmt("%.6f", lm) + ", regression " + fmt("%.1f", lr) + ", classification " +
             fmt("%.15f", lc));
}

std::vector<TrainPair> dataset(std::uint64_t base, std::size_t n) {
  std::vector<TrainPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PlanarScene s = make_pair(kImageSize, kImageSize, pair_seed(base, i));
    out[i] = {s.image_a, s.image_b, s.h};
  }
  return out;
}

struct HeldOutScore {
  double coarse_precision = 0;
  double fine_mma3 = 0;
  double coarse_mma3 = 0;
  std::size_t coarse_matches = 0;
};

HeldOutScore score(const Model& m, const std::vector<TrainPair>& pairs) {
  HeldOutScore out;
  std::size_t correct = 0;
  std::vector<PointPairs> fine, coarse;
  std::vector<Homography> hs;
  for (const auto& p : pairs) {
    const Prediction pr = predict(m, p.a, p.b);
    const auto gt = gt_coarse_labels(p.h, p.a.height, p.a.width);
    for (const auto& ix : pr.coarse.indices) {
      correct += std::find(gt.begin(), gt.end(), ix) != gt.end() ? 1 : 0;
    }
    out.coarse_matches += pr.coarse.size();
    PointPairs f, c;
    for (const auto& x : pr.fine.matches) f.push_back({x.a, x.b});
    for (const auto& x : pr.coarse.matches) c.push_back({x.a, x.b});
    fine.push_back(std::move(f));
    coarse.push_back(std::move(c));
    hs.push_back(p.h);
  }
  const double t3[] = {3.0};
  out.coarse_precision = out.coarse_matches ? static_cast<double>(correct) / static_cast<double>(out.coarse_matches) : 0.0;
  out.fine_mma3 = mma(fine, hs, t3).values[0];
  out.coarse_mma3 = mma(coarse, hs, t3).values[0];
  return out;
}

struct TrainedRun {
  double initial_loss = 0;
  double final_loss = 0;
  double seconds = 0;
  bool diverged = false;
  std::size_t epochs = 0;
  HeldOutScore held_out;
};

TrainedRun train_and_score(PositionMode position, const std::vector<TrainPair>& train_set,
                           const std::vector<TrainPair>& held_out) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.position = position;
  cfg.seed = 42;
  Model m = Model::init(cfg);
  TrainConfig tc;
  tc.seed = 42;
  tc.epochs = 30;
  tc.on_epoch = [&](const EpochStats& s) {
    std::printf("  [%s] epoch %2zu loss %.4f\n", position_mode_name(position).c_str(), s.epoch, s.mean_loss);
    std::fflush(stdout);
  };
  TrainedRun r;
  r.initial_loss = evaluate_loss(m, train_set);
  const auto t0 = Clock::now();
  const TrainResult res = train(m, train_set, tc);
  r.seconds = seconds_since(t0);
  r.diverged = res.diverged;
  r.epochs = res.history.size();
  r.final_loss = evaluate_loss(m, train_set);
  r.held_out = score(m, held_out);
  return r;
}

void end_to_end() {
  const auto train_set = dataset(kTrainSeed, kTrainPairs);
  const auto held_out = dataset(kHeldOutSeed, kHeldOutPairs);

  const TrainedRun rope = train_and_score(PositionMode::relative, train_set, held_out);
  const bool halved = rope.final_loss < 0.5 * rope.initial_loss;
  report(7, "desk-scale-end-to-end",
         !rope.diverged && halved && rope.held_out.coarse_precision >= 0.90 && rope.held_out.fine_mma3 >= 0.70 &&
             rope.seconds < 1800,
         "loss " + fmt("%.4f", rope.initial_loss) + " -> " + fmt("%.4f", rope.final_loss) + ", precision " +
             fmt("%.3f", rope.held_out.coarse_precision) + " (" + std::to_string(rope.held_out.coarse_matches) +
             " matches), fine MMA@3 " + fmt("%.3f", rope.held_out.fine_mma3) + ", train time " +
             fmt("%.0fs", rope.seconds));

  const TrainedRun plain = train_and_score(PositionMode::none, train_set, held_out);
  const bool rope_helps = rope.held_out.coarse_precision >= plain.held_out.coarse_precision;
  const bool fine_helps = rope.held_out.fine_mma3 >= rope.held_out.coarse_mma3;
  report(8, "ablation-directions", !plain.diverged && rope_helps && fine_helps,
         "precision rope " + fmt("%.3f", rope.held_out.coarse_precision) + " vs none " +
             fmt("%.3f", plain.held_out.coarse_precision) + "; MMA@3 fine " + fmt("%.3f", rope.held_out.fine_mma3) +
             " vs coarse-only " + fmt("%.3f", rope.held_out.coarse_mma3));
}

}  // namespace

int main() {
  rope_identities();
  gradient_integrity();
  complexity();
  matching_oracle();
  geometry_oracles();
  loss_values();
  end_to_end();
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
