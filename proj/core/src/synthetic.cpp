#include "slimmatch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "slimmatch/backbone.hpp"
#include "slimmatch/errors.hpp"
#include "slimmatch/rng.hpp"

namespace slimmatch {

Image gen_texture(std::size_t height, std::size_t width, std::uint64_t seed) {
  if (height == 0 || width == 0 || height % kCoarseStride != 0 || width % kCoarseStride != 0) {
    throw ConfigError("texture size " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be a positive multiple of 8");
  }
  Rng rng(seed);
  Image img(height, width);
  for (std::size_t b = 0; b < kTextureBumps; ++b) {
    const double cx = rng.uniform(0.0, static_cast<double>(width));
    const double cy = rng.uniform(0.0, static_cast<double>(height));
    const double sigma = rng.uniform(1.5, 6.0);
    const double amp = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t y = 0; y < height; ++y) {
      const double dy = static_cast<double>(y) - cy;
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx;
        img.at(y, x) += amp * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : img.values) v = range > 0 ? (v - min) / range : 0.0;
  return img;
}

void HomographyLimits::validate() const {
  if (max_rotation_deg < 0 || max_translation < 0 || max_perspective < 0 || !(min_scale > 0) ||
      min_scale > max_scale) {
    throw ConfigError("invalid homography limits");
  }
}

Homography compose_homography(const HomographyParams& p, std::size_t height, std::size_t width) {
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double a = p.rotation_deg * std::numbers::pi / 180.0;
  Eigen::Matrix3d to_center, from_center, shift, rot, scl, persp;
  to_center << 1, 0, cx, 0, 1, cy, 0, 0, 1;
  from_center << 1, 0, -cx, 0, 1, -cy, 0, 0, 1;
  shift << 1, 0, p.tx, 0, 1, p.ty, 0, 0, 1;
  rot << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  scl << p.scale, 0, 0, 0, p.scale, 0, 0, 0, 1;
  persp << 1, 0, 0, 0, 1, 0, p.px, p.py, 1;
  return Homography(to_center * shift * rot * scl * persp * from_center);
}

HomographyParams sample_homography_params(std::uint64_t seed, const HomographyLimits& limits) {
  limits.validate();
  Rng rng(seed);
  HomographyParams p;
  p.rotation_deg = rng.uniform(-limits.max_rotation_deg, limits.max_rotation_deg);
  p.scale = std::exp(rng.uniform(std::log(limits.min_scale), std::log(limits.max_scale)));
  p.tx = rng.uniform(-limits.max_translation, limits.max_translation);
  p.ty = rng.uniform(-limits.max_translation, limits.max_translation);
  p.px = rng.uniform(-limits.max_perspective, limits.max_perspective);
  p.py = rng.uniform(-limits.max_perspective, limits.max_perspective);
  return p;
}

Homography sample_homography(std::uint64_t seed, const HomographyLimits& limits,
                             std::size_t height, std::size_t width) {
  return compose_homography(sample_homography_params(seed, limits), height, width);
}

Image warp_bilinear(const Image& img, const Homography& h) {
  const Eigen::Matrix3d inv = h.inverse().matrix();
  Image out(img.height, img.width);
  const double max_x = static_cast<double>(img.width) - 1.0;
  const double max_y = static_cast<double>(img.height) - 1.0;
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const Eigen::Vector3d q = inv * Eigen::Vector3d(static_cast<double>(x), static_cast<double>(y), 1.0);
      if (q.z() == 0.0) continue;
      const double sx = q.x() / q.z(), sy = q.y() / q.z();
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= max_x && sy <= max_y)) continue;
      const auto x0 = static_cast<std::size_t>(sx), y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - static_cast<double>(x0), fy = sy - static_cast<double>(y0);
      out.at(y, x) = (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                     fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
    }
  }
  return out;
}

PlanarScene make_pair(std::size_t height, std::size_t width, std::uint64_t seed,
                      const HomographyLimits& limits) {
  PlanarScene s;
  s.seed = seed;
  s.image_a = gen_texture(height, width, seed);
  s.h = sample_homography(splitmix64(seed ^ 0x9E3779B97F4A7C15ULL), limits, height, width);
  s.image_b = warp_bilinear(s.image_a, s.h);
  s.labels.coarse = gt_coarse_labels(s.h, height, width);
  return s;
}

std::string pair_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "pair_%05zu", index);
  return buf;
}

void write_homography(const std::filesystem::path& path, const Homography& h) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const auto v = h.values();
  char buf[64];
  for (std::size_t k = 0; k < 9; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", v[k]);
    out << buf << (k % 3 == 2 ? '\n' : ' ');
  }
  if (!out) throw InputError("cannot write " + path.string());
}

Homography read_homography(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<double> v;
  double x;
  while (in >> x) v.push_back(x);
  if (!in.eof() || v.size() != 9) {
    throw InputError(path.string() + ": expected 9 numbers");
  }
  try {
    return Homography::from_values(v);
  } catch (const GeometryError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_pair(const std::filesystem::path& dir, std::size_t index, const PlanarScene& scene) {
  const auto pair_dir = dir / pair_name(index);
  std::error_code ec;
  std::filesystem::create_directories(pair_dir, ec);
  if (ec) throw InputError("cannot create " + pair_dir.string() + ": " + ec.message());
  write_pgm(pair_dir / "a.pgm", scene.image_a);
  write_pgm(pair_dir / "b.pgm", scene.image_b);
  write_homography(pair_dir / "h.txt", scene.h);
}

PairRecord read_pair(const std::filesystem::path& pair_dir) {
  PairRecord r;
  r.name = pair_dir.filename().string();
  r.image_a = read_pgm(pair_dir / "a.pgm");
  r.image_b = read_pgm(pair_dir / "b.pgm");
  r.h = read_homography(pair_dir / "h.txt");
  return r;
}

std::vector<PairRecord> read_dataset(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw InputError("no dataset directory " + dir.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("pair_", 0) == 0) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<PairRecord> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(read_pair(d));
  return out;
}

}  // namespace slimmatch
