#include "slimmatch/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "slimmatch/errors.hpp"

namespace slimmatch {

Tensor image_tensor(const Image& img) {
  return Tensor::from_data({1, img.height, img.width}, img.values);
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> bytes(img.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(img.values[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in, const std::string& name) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  if (token.empty()) throw InputError(name + ": truncated PGM header");
  return token;
}

std::size_t parse_positive(const std::string& token, const std::string& name) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), ::isdigit)) {
    throw InputError(name + ": bad PGM header field '" + token + "'");
  }
  return std::stoul(token);
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + name);
  if (next_token(in, name) != "P5") throw InputError(name + ": not a binary PGM (P5)");
  const std::size_t width = parse_positive(next_token(in, name), name);
  const std::size_t height = parse_positive(next_token(in, name), name);
  const std::size_t maxval = parse_positive(next_token(in, name), name);
  if (width == 0 || height == 0) throw InputError(name + ": empty image");
  if (maxval != 255) throw InputError(name + ": only maxval 255 is supported");
  // next_token consumed exactly one whitespace byte after maxval.
  std::vector<unsigned char> bytes(width * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw InputError(name + ": truncated pixel data");
  }
  Image img(height, width);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.values[i] = bytes[i] / 255.0;
  return img;
}

}  // namespace slimmatch
