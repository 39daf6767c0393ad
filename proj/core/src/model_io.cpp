#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "slimmatch/errors.hpp"
#include "slimmatch/model.hpp"

namespace slimmatch {

namespace {

constexpr const char* kMagic = "slimmatch-model 1";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw InputError("model file: bad value for " + key + ": '" + s + "'");
  return v;
}

std::size_t to_size(const std::string& key, const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError("model file: bad value for " + key + ": '" + s + "'");
  }
  return v;
}

}  // namespace

std::string position_mode_name(PositionMode p) {
  switch (p) {
    case PositionMode::relative: return "relative";
    case PositionMode::absolute: return "absolute";
    case PositionMode::none: return "none";
  }
  return "relative";
}

PositionMode parse_position_mode(const std::string& s) {
  if (s == "relative") return PositionMode::relative;
  if (s == "absolute") return PositionMode::absolute;
  if (s == "none") return PositionMode::none;
  throw ConfigError("unknown position mode '" + s + "' (relative, absolute, none)");
}

void save_model(const std::filesystem::path& path, const Model& m) {
  const auto& c = m.config();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << kMagic << '\n';
  out << "stem_width=" << c.backbone.stem_width << '\n';
  out << "stage_widths=" << c.backbone.stage_widths[0] << ',' << c.backbone.stage_widths[1] << ','
      << c.backbone.stage_widths[2] << '\n';
  out << "coarse_channels=" << c.backbone.coarse_channels << '\n';
  out << "fine_channels=" << c.backbone.fine_channels << '\n';
  out << "layers=" << c.layers << '\n';
  out << "fine_layers=" << c.fine_layers << '\n';
  out << "gamma=" << c.gamma << '\n';
  out << "heads=" << c.heads << '\n';
  out << "position=" << position_mode_name(c.position) << '\n';
  out << "layer_scale=" << (c.layer_scale ? 1 : 0) << '\n';
  out << "layer_scale_init=" << fmt(c.layer_scale_init) << '\n';
  out << "scaled_scores=" << (c.scaled_scores ? 1 : 0) << '\n';
  out << "match_threshold=" << fmt(c.match_threshold) << '\n';
  out << "window=" << c.window << '\n';
  out << "confidence_gate=" << fmt(c.confidence_gate) << '\n';
  out << "beta=" << fmt(c.loss.beta) << '\n';
  out << "phi=" << fmt(c.loss.phi) << '\n';
  out << "alpha=" << fmt(c.loss.alpha) << '\n';
  out << "eta=" << fmt(c.loss.eta) << '\n';
  out << "psi=" << fmt(c.loss.psi) << '\n';
  out << "eps=" << fmt(c.loss.eps) << '\n';
  out << "literal_negative_normalizer=" << (c.loss.literal_negative_normalizer ? 1 : 0) << '\n';
  out << "seed=" << c.seed << '\n';

  const ParamSet params = m.parameters();
  out << "params=" << params.entries().size() << '\n';
  for (const auto& [name, t] : params.entries()) {
    out << "param " << name;
    for (std::size_t d : t.shape()) out << ' ' << d;
    out << '\n';
    auto v = t.data();
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << fmt(v[i]);
    out << '\n';
  }
  if (!out) throw InputError("error writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read model " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw InputError(path.string() + " is not a model file");
  }
  std::map<std::string, std::string> kv;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("model file: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "params") {
      count = to_size(key, value);
      break;
    }
    kv[key] = value;
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw InputError("model file: missing " + key);
    return it->second;
  };

  ModelConfig c;
  c.backbone.stem_width = to_size("stem_width", get("stem_width"));
  {
    std::stringstream ss(get("stage_widths"));
    std::string part;
    for (std::size_t s = 0; s < 3; ++s) {
      if (!std::getline(ss, part, ',')) throw InputError("model file: bad stage_widths");
      c.backbone.stage_widths[s] = to_size("stage_widths", part);
    }
  }
  c.backbone.coarse_channels = to_size("coarse_channels", get("coarse_channels"));
  c.backbone.fine_channels = to_size("fine_channels", get("fine_channels"));
  c.layers = to_size("layers", get("layers"));
  c.fine_layers = to_size("fine_layers", get("fine_layers"));
  c.gamma = to_size("gamma", get("gamma"));
  c.heads = to_size("heads", get("heads"));
  c.position = parse_position_mode(get("position"));
  c.layer_scale = to_size("layer_scale", get("layer_scale")) != 0;
  c.layer_scale_init = to_double("layer_scale_init", get("layer_scale_init"));
  c.scaled_scores = to_size("scaled_scores", get("scaled_scores")) != 0;
  c.match_threshold = to_double("match_threshold", get("match_threshold"));
  c.window = to_size("window", get("window"));
  c.confidence_gate = to_double("confidence_gate", get("confidence_gate"));
  c.loss.beta = to_double("beta", get("beta"));
  c.loss.phi = to_double("phi", get("phi"));
  c.loss.alpha = to_double("alpha", get("alpha"));
  c.loss.eta = to_double("eta", get("eta"));
  c.loss.psi = to_double("psi", get("psi"));
  c.loss.eps = to_double("eps", get("eps"));
  c.loss.literal_negative_normalizer =
      to_size("literal_negative_normalizer", get("literal_negative_normalizer")) != 0;
  c.seed = to_size("seed", get("seed"));

  Model m = Model::init(c);
  const ParamSet params = m.parameters();
  if (count != params.entries().size()) {
    throw InputError("model file lists " + std::to_string(count) + " parameters, configuration has " +
                     std::to_string(params.entries().size()));
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw InputError("model file truncated");
    std::istringstream header(line);
    std::string tag, name;
    header >> tag >> name;
    Tensor t = params.find(name);
    if (tag != "param" || !t.defined()) throw InputError("model file: unexpected entry '" + line + "'");
    Shape shape;
    std::size_t d;
    while (header >> d) shape.push_back(d);
    if (shape != t.shape()) {
      throw InputError("model file: " + name + " has shape " + shape_str(shape) + ", expected " +
                       shape_str(t.shape()));
    }
    if (!std::getline(in, line)) throw InputError("model file truncated");
    std::istringstream values(line);
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::string tok;
      if (!(values >> tok)) throw InputError("model file: too few values for " + name);
      dst[i] = to_double(name, tok);
    }
  }
  return m;
}

}  // namespace slimmatch
