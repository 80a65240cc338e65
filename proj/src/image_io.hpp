#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvf::io {

/// 8-bit raster, interleaved channels, row-major.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

void write_png_rgb(const std::string& path, const Raster& img);
void write_png_gray(const std::string& path, const Raster& img);
/// Bilevel PNG (bit depth 1); any nonzero pixel is written as 1.
void write_png_bilevel(const std::string& path, const Raster& img);

/// Reads 8-bit RGB, gray or 1-bit PNGs. Gray/bilevel files load with one
/// channel, bilevel samples expanded to {0, 1}.
Raster read_png(const std::string& path);

}  // namespace mvf::io
