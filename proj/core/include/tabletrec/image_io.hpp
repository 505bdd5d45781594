#pragma once

#include <string>

#include "tabletrec/grid.hpp"

namespace tabletrec {

// 8-bit RGB(A); color clamped to [0,1]. Alpha pass may be empty for plain RGB.
void write_png(const std::string& path, const Image& color, const GridF& alpha = {});
// 16-bit single-channel (e.g. depth in millimeters).
void write_png16(const std::string& path, const Grid<uint16_t>& gray);

struct PngData {
  int width = 0, height = 0, channels = 0, bit_depth = 8;
  std::vector<uint16_t> samples;  // row-major, interleaved
};
PngData read_png(const std::string& path);

Image read_png_rgb(const std::string& path);  // any PNG, mapped to [0,1] RGB

// PFM: 'PF' (3-channel) / 'Pf' (1-channel), little-endian negative scale.
void write_pfm(const std::string& path, const GridF& gray);
void write_pfm(const std::string& path, const Image& rgb);
bool read_pfm(const std::string& path, GridF& gray, Image& rgb, bool& is_color);

}  // namespace tabletrec
