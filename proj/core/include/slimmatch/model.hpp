#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "slimmatch/backbone.hpp"
#include "slimmatch/ftm.hpp"
#include "slimmatch/losses.hpp"
#include "slimmatch/matching.hpp"
#include "slimmatch/slimformer.hpp"

namespace slimmatch {

struct ModelConfig {
  BackboneConfig backbone = BackboneConfig::full();
  std::size_t layers = kDeepMatcherLayers;  // coarse interleave depth L
  std::size_t fine_layers = 1;              // L2
  std::size_t gamma = 4;                    // FFN scale rate
  std::size_t heads = 1;
  PositionMode position = PositionMode::relative;
  bool layer_scale = true;  // false pins xi = 1
  double layer_scale_init = 0.1;
  bool scaled_scores = true;
  double match_threshold = kDefaultMatchThreshold;  // lambda
  std::size_t window = kDefaultWindow;
  double confidence_gate = kDefaultConfidenceGate;  // tau_c
  LossWeights loss;
  std::uint64_t seed = 0;

  static ModelConfig tiny();
  static ModelConfig deepmatcher();
  static ModelConfig deepmatcher_large();
  void validate() const;
  AttentionOptions attention() const { return {position, heads}; }
};

struct ModelParams {
  BackboneParams backbone;
  FtmParams ftm;
  std::vector<InterleaveLayer> coarse;
  std::vector<InterleaveLayer> fine;
  FineHeadParams head;

  void collect(ParamSet& set) const;
};

class Model {
 public:
  static Model init(const ModelConfig& cfg);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ParamSet parameters() const;

 private:
  Model(ModelConfig cfg, ModelParams params) : config_(std::move(cfg)), params_(std::move(params)) {}
  ModelConfig config_;
  ModelParams params_;
};

// Differentiable intermediates of one forward pass through the coarse stage.
struct CoarseForward {
  FeaturePyramid a, b;
  Tensor tokens_a, tokens_b;  // after the interleave
  Tensor assignment;          // G
};

CoarseForward forward_coarse(const Model& m, const Image& a, const Image& b);

struct Prediction {
  MatchSet coarse;
  MatchSet fine;
  std::vector<double> assignment;  // G, row-major
  std::size_t rows = 0, cols = 0;
};

// Inference without gradient recording.
Prediction predict(const Model& m, const Image& a, const Image& b);

struct LossBreakdown {
  Tensor total, matching, regression, classification;
  std::size_t positives = 0;  // |E_gt|
  std::size_t refined = 0;    // windows supervised by the fine losses
  bool no_valid_offsets = false;
};

// Training objective for one pair. The fine stage is supervised on E_gt plus
// the current mutual-nearest predictions, or on `fine_selection` when given.
// Throws InputError when the pair has no ground-truth coarse match.
LossBreakdown training_loss(const Model& m, const Image& a, const Image& b, const Homography& h,
                            const std::optional<std::vector<IndexPair>>& fine_selection = {});

// Text format: config key=value lines, then one block per parameter.
void save_model(const std::filesystem::path& path, const Model& m);
Model load_model(const std::filesystem::path& path);
std::string position_mode_name(PositionMode p);
PositionMode parse_position_mode(const std::string& s);

}  // namespace slimmatch
