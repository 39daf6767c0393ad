#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slimmatch/image.hpp"
#include "slimmatch/matching.hpp"

namespace slimmatch {

inline constexpr const char* kMatchHeader = "xA\tyA\txB\tyB\tconf";

// Header line plus one row per match, 4-decimal fixed point.
std::string format_matches_tsv(const std::vector<Match>& matches);
void write_matches_tsv(const std::filesystem::path& path, const std::vector<Match>& matches);
std::vector<Match> parse_matches_tsv(const std::string& text);
std::vector<Match> read_matches_tsv(const std::filesystem::path& path);

// Both images side by side (A left, B right) with one line per match.
std::string format_matches_svg(const Image& a, const Image& b, const std::vector<Match>& matches);
void write_matches_svg(const std::filesystem::path& path, const Image& a, const Image& b,
                       const std::vector<Match>& matches);

// Uncompressed 24-bit BMP, base64 encoded (used for embedding in SVG).
std::string bmp_base64(const Image& img);

}  // namespace slimmatch
