#include "slimmatch/model.hpp"

#include <algorithm>
#include <set>

#include "slimmatch/errors.hpp"
#include "slimmatch/ops.hpp"

namespace slimmatch {

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.backbone = BackboneConfig::tiny();
  c.layers = 2;
  c.fine_layers = 1;
  return c;
}

ModelConfig ModelConfig::deepmatcher() { return {}; }

ModelConfig ModelConfig::deepmatcher_large() {
  ModelConfig c;
  c.layers = kDeepMatcherLargeLayers;
  return c;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (layers == 0 || fine_layers == 0) throw ConfigError("interleave depths must be positive");
  if (gamma == 0 || heads == 0) throw ConfigError("gamma and heads must be positive");
  for (std::size_t c : {backbone.coarse_channels, backbone.fine_channels}) {
    if (c % 4 != 0 || c % heads != 0) {
      throw ConfigError("feature width " + std::to_string(c) +
                        " must be divisible by 4 and by the head count");
    }
  }
  if (!(match_threshold >= 0 && match_threshold < 1)) throw ConfigError("lambda must be in [0, 1)");
  if (window == 0 || window % 2 == 0) throw ConfigError("window size must be odd");
  if (!(confidence_gate >= 0 && confidence_gate <= 1)) throw ConfigError("tau_c must be in [0, 1]");
  loss.validate();
}

void ModelParams::collect(ParamSet& set) const {
  backbone.collect(set, "backbone");
  ftm.collect(set, "ftm");
  for (std::size_t l = 0; l < coarse.size(); ++l) coarse[l].collect(set, "coarse." + std::to_string(l));
  for (std::size_t l = 0; l < fine.size(); ++l) fine[l].collect(set, "fine." + std::to_string(l));
  head.collect(set, "head");
}

Model Model::init(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelParams p;
  p.backbone = BackboneParams::init(cfg.backbone, rng);
  p.ftm = FtmParams::init(cfg.backbone.coarse_channels, rng);
  const auto opt = cfg.attention();
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.coarse.push_back(InterleaveLayer::init(cfg.backbone.coarse_channels, cfg.gamma, rng, opt,
                                             cfg.layer_scale_init, cfg.layer_scale));
  }
  for (std::size_t l = 0; l < cfg.fine_layers; ++l) {
    p.fine.push_back(InterleaveLayer::init(cfg.backbone.fine_channels, cfg.gamma, rng, opt,
                                           cfg.layer_scale_init, cfg.layer_scale));
  }
  p.head = FineHeadParams::init(cfg.backbone.fine_channels, rng);
  return Model(cfg, std::move(p));
}

ParamSet Model::parameters() const {
  ParamSet set;
  params_.collect(set);
  return set;
}

CoarseForward forward_coarse(const Model& m, const Image& a, const Image& b) {
  const auto& cfg = m.config();
  const auto& p = m.params();
  CoarseForward f;
  f.a = extract_features(a, cfg.backbone, p.backbone);
  f.b = extract_features(b, cfg.backbone, p.backbone);
  TokenSeq ta = tokens_from_map(feature_transition(f.a.coarse, p.ftm));
  TokenSeq tb = tokens_from_map(feature_transition(f.b.coarse, p.ftm));
  auto [oa, ob] = interleave(std::move(ta), std::move(tb), p.coarse, cfg.layers, cfg.attention());
  f.tokens_a = oa.tokens;
  f.tokens_b = ob.tokens;
  f.assignment = dual_softmax(score_matrix(f.tokens_a, f.tokens_b, cfg.scaled_scores));
  return f;
}

Prediction predict(const Model& m, const Image& a, const Image& b) {
  NoGradGuard no_grad;
  const auto& cfg = m.config();
  CoarseForward f = forward_coarse(m, a, b);
  Prediction out;
  out.rows = f.assignment.dim(0);
  out.cols = f.assignment.dim(1);
  out.assignment.assign(f.assignment.data().begin(), f.assignment.data().end());
  out.coarse = extract_coarse_matches(f.assignment, cfg.match_threshold, f.a.keypoints, f.b.keypoints);
  out.fine.level = MatchLevel::fine;
  if (out.coarse.empty()) return out;
  FineWindows w = crop_fine_windows(out.coarse, f.a.fine, f.b.fine, cfg.window);
  FineOutput r = fine_refine(w, m.params().fine, m.params().head, cfg.attention());
  out.fine = assemble_fine_matches(out.coarse, r.offset, r.confidence, cfg.confidence_gate);
  return out;
}

LossBreakdown training_loss(const Model& m, const Image& a, const Image& b, const Homography& h,
                            const std::optional<std::vector<IndexPair>>& fine_selection) {
  const auto& cfg = m.config();
  const std::vector<IndexPair> positives = gt_coarse_labels(h, a.height, a.width, b.height, b.width);
  if (positives.empty()) throw InputError("pair has no ground-truth coarse matches");

  CoarseForward f = forward_coarse(m, a, b);
  LossBreakdown out;
  out.positives = positives.size();
  out.matching = matching_loss(f.assignment, positives, cfg.loss);

  std::vector<IndexPair> selection;
  if (fine_selection) {
    selection = *fine_selection;
  } else {
    selection = positives;
    std::set<std::size_t> used;
    for (const auto& pr : positives) used.insert(pr.i);
    auto gv = f.assignment.data();
    const std::vector<double> g(gv.begin(), gv.end());
    for (const auto& pr : mutual_nearest(g, f.assignment.dim(0), f.assignment.dim(1),
                                         cfg.match_threshold)) {
      if (used.insert(pr.i).second) selection.push_back(pr);
    }
  }

  MatchSet coarse;
  for (const auto& [i, j] : selection) {
    if (i >= f.a.keypoints.size() || j >= f.b.keypoints.size()) {
      throw ShapeError("training_loss: fine selection index out of range");
    }
    coarse.indices.push_back({i, j});
    coarse.matches.push_back({f.a.keypoints[i], f.b.keypoints[j], 1.0});
  }
  out.refined = coarse.size();
  if (coarse.empty()) {
    out.regression = Tensor::scalar(0.0);
    out.classification = Tensor::scalar(0.0);
    out.no_valid_offsets = true;
  } else {
    GroundTruthLabels labels;
    labels.coarse = positives;
    fill_fine_labels(labels, h, coarse, cfg.loss.psi);
    FineWindows w = crop_fine_windows(coarse, f.a.fine, f.b.fine, cfg.window);
    FineOutput r = fine_refine(w, m.params().fine, m.params().head, cfg.attention());
    out.regression = regression_loss(r.offset, labels.offsets, labels.valid, &out.no_valid_offsets);
    out.classification = classification_loss(r.confidence, labels.confidence, cfg.loss.eps);
  }
  out.total = total_loss(out.matching, out.regression, out.classification, cfg.loss);
  return out;
}

}  // namespace slimmatch
