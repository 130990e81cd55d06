#pragma once

// Image, label map, probability map and seed file formats.

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rwnoise/graph.hpp"
#include "rwnoise/grid.hpp"

namespace rwnoise {

/// Malformed or unsupported file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decodes PGM (P2/P5, 8 or 16 bit), PNG (gray, gray+alpha, RGB, RGBA, palette; alpha is
/// dropped, palette images are expanded to RGB) or PFM (Pf / PF) from memory.
Image decode_image(std::string_view bytes);
Image read_image(const std::filesystem::path& path);

/// Stacks single-channel images of equal size into one multi-channel image.
Image stack_channels(const std::vector<Image>& planes);

/// Label maps: palette PNG (indices are labels), 8/16-bit gray PNG or PGM.
LabelMap decode_label_map(std::string_view bytes);
LabelMap read_label_map(const std::filesystem::path& path);

/// Palette PNG whose pixel indices are the labels (0..255), colored with the fixed palette.
std::string encode_label_png(const LabelMap& labels);
/// RGB PNG of the source image in gray with label colors blended in at `alpha`.
std::string encode_overlay_png(const Image& image, const LabelMap& labels, double alpha = 0.5);
/// Single-channel little-endian PFM.
std::string encode_pfm(int width, int height, const std::vector<double>& values);
/// PGM, 8-bit when every value fits, else 16-bit; values are rounded and clamped to 0..65535.
std::string encode_pgm(const Image& image);

/// RGB of the fixed 10-color palette entry for `label`.
std::array<unsigned char, 3> palette_color(int label);

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// JSON array of {x, y, label}; a top-level {"seeds": [...]} object is accepted too.
SeedMap parse_seeds(std::string_view json_text);
std::string seeds_to_json(const SeedMap& seeds);

}  // namespace rwnoise
