#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slimmatch/geometry.hpp"
#include "slimmatch/image.hpp"
#include "slimmatch/losses.hpp"

namespace slimmatch {

inline constexpr std::size_t kTextureBumps = 32;

// Sum of random Gaussian bumps, min-max normalized to [0, 1].
Image gen_texture(std::size_t height, std::size_t width, std::uint64_t seed);

struct HomographyLimits {
  double max_rotation_deg = 25.0;
  double min_scale = 0.8;
  double max_scale = 1.25;
  double max_translation = 8.0;  // pixels
  double max_perspective = 1e-3;

  static HomographyLimits zero() { return {0.0, 1.0, 1.0, 0.0, 0.0}; }
  void validate() const;
};

struct HomographyParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
  double px = 0.0;
  double py = 0.0;
};

// center * translation * rotation * scale * perspective * center^-1, where
// `center` moves the origin to the image center.
Homography compose_homography(const HomographyParams& p, std::size_t height, std::size_t width);

HomographyParams sample_homography_params(std::uint64_t seed, const HomographyLimits& limits);
Homography sample_homography(std::uint64_t seed, const HomographyLimits& limits,
                             std::size_t height, std::size_t width);

// out(p) = img(H^-1 p), bilinear; samples outside the source read as 0.
Image warp_bilinear(const Image& img, const Homography& h);

struct PlanarScene {
  Image image_a;
  Image image_b;
  Homography h;
  std::uint64_t seed = 0;
  GroundTruthLabels labels;  // coarse labels only
};

PlanarScene make_pair(std::size_t height, std::size_t width, std::uint64_t seed,
                      const HomographyLimits& limits = {});

// One pair as stored on disk.
struct PairRecord {
  std::string name;  // pair_00042
  Image image_a;
  Image image_b;
  Homography h;
};

std::string pair_name(std::size_t index);
void write_homography(const std::filesystem::path& path, const Homography& h);
Homography read_homography(const std::filesystem::path& path);

// Writes pair_%05d/{a.pgm,b.pgm,h.txt} under `dir`.
void write_pair(const std::filesystem::path& dir, std::size_t index, const PlanarScene& scene);
PairRecord read_pair(const std::filesystem::path& pair_dir);
// All pair_* subdirectories, sorted by name.
std::vector<PairRecord> read_dataset(const std::filesystem::path& dir);

}  // namespace slimmatch
