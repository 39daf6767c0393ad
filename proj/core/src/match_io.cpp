#include "slimmatch/match_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "slimmatch/errors.hpp"

namespace slimmatch {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("error writing " + path.string());
}

std::string base64(const std::vector<unsigned char>& bytes) {
  static constexpr char table[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const unsigned b0 = bytes[i];
    const unsigned b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const unsigned b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const unsigned v = (b0 << 16) | (b1 << 8) | b2;
    out += table[(v >> 18) & 63];
    out += table[(v >> 12) & 63];
    out += i + 1 < bytes.size() ? table[(v >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? table[v & 63] : '=';
  }
  return out;
}

void put_le(std::vector<unsigned char>& buf, std::uint32_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) buf.push_back(static_cast<unsigned char>((v >> (8 * k)) & 0xff));
}

}  // namespace

std::string format_matches_tsv(const std::vector<Match>& matches) {
  std::string out = kMatchHeader;
  out += '\n';
  char buf[160];
  for (const auto& m : matches) {
    std::snprintf(buf, sizeof buf, "%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n", m.a.x, m.a.y, m.b.x, m.b.y,
                  m.confidence);
    out += buf;
  }
  return out;
}

void write_matches_tsv(const std::filesystem::path& path, const std::vector<Match>& matches) {
  write_text(path, format_matches_tsv(matches));
}

std::vector<Match> parse_matches_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMatchHeader) {
    throw InputError("match file must start with the header '" + std::string(kMatchHeader) + "'");
  }
  std::vector<Match> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Match m;
    std::string extra;
    if (!(fields >> m.a.x >> m.a.y >> m.b.x >> m.b.y >> m.confidence) || (fields >> extra)) {
      throw InputError("match file: malformed row " + std::to_string(row));
    }
    out.push_back(m);
  }
  return out;
}

std::vector<Match> read_matches_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_matches_tsv(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string bmp_base64(const Image& img) {
  const std::uint32_t w = static_cast<std::uint32_t>(img.width);
  const std::uint32_t h = static_cast<std::uint32_t>(img.height);
  const std::uint32_t stride = (3 * w + 3) / 4 * 4;
  std::vector<unsigned char> buf;
  buf.reserve(54 + stride * h);
  buf.push_back('B');
  buf.push_back('M');
  put_le(buf, 54 + stride * h, 4);
  put_le(buf, 0, 4);
  put_le(buf, 54, 4);
  put_le(buf, 40, 4);
  put_le(buf, w, 4);
  put_le(buf, h, 4);
  put_le(buf, 1, 2);
  put_le(buf, 24, 2);
  put_le(buf, 0, 4);
  put_le(buf, stride * h, 4);
  put_le(buf, 2835, 4);
  put_le(buf, 2835, 4);
  put_le(buf, 0, 4);
  put_le(buf, 0, 4);
  for (std::uint32_t r = h; r-- > 0;) {  // bottom-up rows
    for (std::uint32_t c = 0; c < w; ++c) {
      const double v = std::clamp(img.at(r, c), 0.0, 1.0);
      const auto g = static_cast<unsigned char>(std::lround(v * 255.0));
      buf.insert(buf.end(), {g, g, g});
    }
    for (std::uint32_t p = 3 * w; p < stride; ++p) buf.push_back(0);
  }
  return base64(buf);
}

std::string format_matches_svg(const Image& a, const Image& b, const std::vector<Match>& matches) {
  const std::size_t width = a.width + b.width;
  const std::size_t height = std::max(a.height, b.height);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%zu\" height=\"%zu\" "
                "viewBox=\"0 0 %zu %zu\">\n",
                width, height, width, height);
  out += buf;
  std::snprintf(buf, sizeof buf, "<image x=\"0\" y=\"0\" width=\"%zu\" height=\"%zu\" href=\"data:image/bmp;base64,",
                a.width, a.height);
  out += buf;
  out += bmp_base64(a);
  out += "\"/>\n";
  std::snprintf(buf, sizeof buf, "<image x=\"%zu\" y=\"0\" width=\"%zu\" height=\"%zu\" href=\"data:image/bmp;base64,",
                a.width, b.width, b.height);
  out += buf;
  out += bmp_base64(b);
  out += "\"/>\n<g stroke-width=\"1\" stroke-opacity=\"0.8\">\n";
  for (std::size_t k = 0; k < matches.size(); ++k) {
    const auto& m = matches[k];
    // Hue cycles through the matches so neighbouring segments stay distinguishable.
    const int hue = static_cast<int>((k * 47) % 360);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.4f\" y1=\"%.4f\" x2=\"%.4f\" y2=\"%.4f\" stroke=\"hsl(%d,90%%,50%%)\"/>\n",
                  m.a.x + 0.5, m.a.y + 0.5, m.b.x + 0.5 + static_cast<double>(a.width), m.b.y + 0.5,
                  hue);
    out += buf;
  }
  out += "</g>\n</svg>\n";
  return out;
}

void write_matches_svg(const std::filesystem::path& path, const Image& a, const Image& b,
                       const std::vector<Match>& matches) {
  write_text(path, format_matches_svg(a, b, matches));
}

}  // namespace slimmatch
