#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slimmatch/model.hpp"

namespace slimmatch {

struct TrainPair {
  Image a;
  Image b;
  Homography h;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::size_t steps = 0;
  std::size_t skipped = 0;  // pairs without ground-truth matches
};

struct TrainConfig {
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::size_t epochs = 30;
  double clip_norm = 0.5;  // global gradient norm
  std::uint64_t seed = 0;  // pair order
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochStats> history;
  bool diverged = false;
};

// Per-pair gradient steps. On a non-finite loss or gradient the parameters
// are restored to the end of the last completed epoch and training stops.
TrainResult train(Model& model, std::span<const TrainPair> pairs, const TrainConfig& cfg);

// Mean total loss over the pairs that have ground-truth matches.
double evaluate_loss(const Model& model, std::span<const TrainPair> pairs);

}  // namespace slimmatch
