#include "slimmatch/train.hpp"

#include <cmath>
#include <numeric>

#include "slimmatch/errors.hpp"
#include "slimmatch/rng.hpp"

namespace slimmatch {

namespace {

std::vector<std::vector<double>> snapshot(const ParamSet& params) {
  std::vector<std::vector<double>> out;
  for (const auto& e : params.entries()) out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

void restore(const ParamSet& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    Tensor t = params.entries()[k].tensor;
    std::copy(values[k].begin(), values[k].end(), t.mutable_data().begin());
  }
}

}  // namespace

TrainResult train(Model& model, std::span<const TrainPair> pairs, const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0) || !(cfg.clip_norm > 0) || !(cfg.momentum >= 0 && cfg.momentum < 1)) {
    throw ConfigError("invalid training hyper-parameters");
  }
  ParamSet params = model.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& e : params.entries()) velocity.emplace_back(e.tensor.numel(), 0.0);
  auto last_good = snapshot(params);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const TrainPair& p = pairs[idx];
      params.zero_grad();
      LossBreakdown loss;
      try {
        loss = training_loss(model, p.a, p.b, p.h);
      } catch (const InputError&) {
        ++stats.skipped;
        continue;
      }
      const double value = loss.total.item();
      bool finite = std::isfinite(value);
      double gnorm = 0.0;
      if (finite) {
        backward(loss.total);
        gnorm = params.grad_norm();
        finite = std::isfinite(gnorm);
      }
      if (!finite) {
        restore(params, last_good);
        result.diverged = true;
        return result;
      }
      const double factor = gnorm > cfg.clip_norm ? cfg.clip_norm / gnorm : 1.0;
      for (std::size_t k = 0; k < params.entries().size(); ++k) {
        Tensor t = params.entries()[k].tensor;
        if (!t.requires_grad() || !t.has_grad()) continue;
        auto g = t.grad();
        auto v = t.mutable_data();
        auto& vel = velocity[k];
        for (std::size_t n = 0; n < v.size(); ++n) {
          vel[n] = cfg.momentum * vel[n] + factor * g[n];
          v[n] -= cfg.learning_rate * vel[n];
        }
      }
      loss_sum += value;
      ++stats.steps;
    }
    stats.mean_loss = stats.steps ? loss_sum / static_cast<double>(stats.steps) : 0.0;
    last_good = snapshot(params);
    result.history.push_back(stats);
    if (cfg.on_epoch) cfg.on_epoch(stats);
  }
  return result;
}

double evaluate_loss(const Model& model, std::span<const TrainPair> pairs) {
  NoGradGuard no_grad;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    try {
      sum += training_loss(model, p.a, p.b, p.h).total.item();
      ++n;
    } catch (const InputError&) {
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace slimmatch
