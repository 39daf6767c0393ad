#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "slimmatch/commands.hpp"

using namespace slimmatch;

namespace {

ModelConfig preset(const std::string& name) {
  if (name == "tiny") return ModelConfig::tiny();
  if (name == "deepmatcher") return ModelConfig::deepmatcher();
  if (name == "deepmatcher-l") return ModelConfig::deepmatcher_large();
  throw ConfigError("unknown preset '" + name + "' (tiny, deepmatcher, deepmatcher-l)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detector-free image matching with linear-cost attention"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::size_t synth_size = 0;
  std::string synth_out;
  auto* s = app.add_subcommand("synth", "Generate synthetic homography pairs");
  s->add_option("--count", synth.count, "Number of pairs")->capture_default_str();
  s->add_option("--size", synth_size, "Square image size (overrides --height/--width)");
  s->add_option("--height", synth.height)->capture_default_str();
  s->add_option("--width", synth.width)->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--max-rotation", synth.limits.max_rotation_deg, "Degrees")->capture_default_str();
  s->add_option("--min-scale", synth.limits.min_scale)->capture_default_str();
  s->add_option("--max-scale", synth.limits.max_scale)->capture_default_str();
  s->add_option("--max-translation", synth.limits.max_translation, "Pixels")->capture_default_str();
  s->add_option("--max-perspective", synth.limits.max_perspective)->capture_default_str();
  s->add_option("out_dir", synth_out)->required();

  TrainOptions train;
  std::string train_preset = "tiny", train_data, train_out, train_position = "relative";
  bool no_layer_scale = false;
  auto* t = app.add_subcommand("train", "Train a model on a synthetic dataset");
  t->add_option("data_dir", train_data)->required();
  t->add_option("out_model", train_out)->required();
  t->add_option("--preset", train_preset, "tiny, deepmatcher, deepmatcher-l")->capture_default_str();
  t->add_option("--epochs", train.train.epochs)->capture_default_str();
  t->add_option("--lr", train.train.learning_rate)->capture_default_str();
  t->add_option("--momentum", train.train.momentum)->capture_default_str();
  t->add_option("--clip", train.train.clip_norm)->capture_default_str();
  t->add_option("--seed", train.train.seed, "Seeds both initialization and pair order")->capture_default_str();
  t->add_option("--layers", train.model.layers, "Coarse interleave depth (default from preset)");
  t->add_option("--fine-layers", train.model.fine_layers);
  t->add_option("--gamma", train.model.gamma);
  t->add_option("--position", train_position, "relative, absolute, none")->capture_default_str();
  t->add_flag("--no-layer-scale", no_layer_scale, "Pin the residual scale at 1");
  t->add_option("--threshold", train.model.match_threshold, "Coarse confidence threshold");
  t->add_option("--window", train.model.window);
  t->add_option("--confidence-gate", train.model.confidence_gate);
  t->add_option("--beta", train.model.loss.beta);
  t->add_option("--phi", train.model.loss.phi);
  t->add_option("--alpha", train.model.loss.alpha);
  t->add_option("--eta", train.model.loss.eta);
  t->add_option("--psi", train.model.loss.psi);
  t->add_flag("--literal-negative-normalizer", train.model.loss.literal_negative_normalizer);
  bool unscaled_scores = false;
  t->add_flag("--unscaled-scores", unscaled_scores, "Plain inner-product score matrix");

  MatchOptions match;
  std::string match_model, match_a, match_b, match_out, match_svg;
  auto* m = app.add_subcommand("match", "Match two PGM images");
  m->add_option("model", match_model)->required();
  m->add_option("image_a", match_a)->required();
  m->add_option("image_b", match_b)->required();
  m->add_option("out_tsv", match_out)->required();
  m->add_option("--svg", match_svg, "Also write a side-by-side visualization");

  EvalOptions eval;
  std::string eval_matches, eval_gt;
  auto* e = app.add_subcommand("eval", "Score predictions against ground truth");
  e->add_option("matches_dir", eval_matches)->required();
  e->add_option("gt_dir", eval_gt)->required();
  e->add_option("--metric", eval.metric, "mma, ccm, auc")->capture_default_str();

  BenchOptions bench;
  std::vector<std::string> bench_kinds{"vector", "vanilla"};
  std::string bench_csv;
  auto* b = app.add_subcommand("bench", "Attention cost scaling (MACs and wall time)");
  b->add_option("--n", bench.ns, "Token counts, ascending")->capture_default_str();
  b->add_option("--channels", bench.channels)->capture_default_str();
  b->add_option("--kinds", bench_kinds, "vector, vanilla")->capture_default_str();
  b->add_option("--repeats", bench.repeats)->capture_default_str();
  b->add_option("--csv", bench_csv, "Also write the table to a file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (s->parsed()) {
      if (synth_size) synth.height = synth.width = synth_size;
      synth.out_dir = synth_out;
      return cmd_synth(synth, std::cout, std::cerr);
    }
    if (t->parsed()) {
      ModelConfig base = preset(train_preset);
      // Options not given on the command line take the preset's value.
      if (t->count("--layers") == 0) train.model.layers = base.layers;
      if (t->count("--fine-layers") == 0) train.model.fine_layers = base.fine_layers;
      if (t->count("--gamma") == 0) train.model.gamma = base.gamma;
      train.model.backbone = base.backbone;
      train.model.position = parse_position_mode(train_position);
      train.model.layer_scale = !no_layer_scale;
      train.model.scaled_scores = !unscaled_scores;
      train.model.seed = train.train.seed;
      train.data_dir = train_data;
      train.out_model = train_out;
      return cmd_train(train, std::cout, std::cerr);
    }
    if (m->parsed()) {
      match.model = match_model;
      match.image_a = match_a;
      match.image_b = match_b;
      match.out_tsv = match_out;
      if (!match_svg.empty()) match.out_svg = match_svg;
      return cmd_match(match, std::cout, std::cerr);
    }
    if (e->parsed()) {
      eval.matches_dir = eval_matches;
      eval.gt_dir = eval_gt;
      return cmd_eval(eval, std::cout, std::cerr);
    }
    if (b->parsed()) {
      bench.kinds.clear();
      for (const auto& k : bench_kinds) bench.kinds.push_back(parse_attention_kind(k));
      if (!bench_csv.empty()) bench.out_csv = bench_csv;
      return cmd_bench(bench, std::cout, std::cerr);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
