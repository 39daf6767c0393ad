#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "slimmatch/tensor.hpp"

namespace slimmatch {

// Grayscale image, intensities in [0, 1], row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  bool operator==(const Image&) const = default;
};

// [1 x H x W] constant tensor.
Tensor image_tensor(const Image& img);

// Binary PGM (P5, maxval 255). Values are quantized with round(v * 255).
void write_pgm(const std::filesystem::path& path, const Image& img);
// Throws InputError on anything other than a well-formed 8-bit P5 file.
Image read_pgm(const std::filesystem::path& path);

}  // namespace slimmatch
