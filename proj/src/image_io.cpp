#include "image_io.hpp"

#include <cstdio>
#include <memory>

#include <png.h>

#include "errors.hpp"

namespace mvf::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::vector<uint8_t>>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check(const Raster& img, int channels, const std::string& path) {
  if (img.channels != channels || img.width <= 0 || img.height <= 0 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * channels) {
    throw invalid_argument("raster layout mismatch for " + path);
  }
}

}  // namespace

void write_png_rgb(const std::string& path, const Raster& img) {
  check(img, 3, path);
  std::vector<std::vector<uint8_t>> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    const auto* src = img.pixels.data() + static_cast<std::size_t>(y) * img.width * 3;
    rows[y].assign(src, src + img.width * 3);
  }
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png_gray(const std::string& path, const Raster& img) {
  check(img, 1, path);
  std::vector<std::vector<uint8_t>> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    const auto* src = img.pixels.data() + static_cast<std::size_t>(y) * img.width;
    rows[y].assign(src, src + img.width);
  }
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_png_bilevel(const std::string& path, const Raster& img) {
  check(img, 1, path);
  const int stride = (img.width + 7) / 8;
  std::vector<std::vector<uint8_t>> rows(img.height, std::vector<uint8_t>(stride, 0));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.pixels[static_cast<std::size_t>(y) * img.width + x]) {
        rows[y][x / 8] |= static_cast<uint8_t>(0x80 >> (x % 8));
      }
    }
  }
  write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 1, rows);
}

Raster read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw not_found("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("libpng init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("not a readable PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  const bool bilevel = color == PNG_COLOR_TYPE_GRAY && depth == 1;

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_packing(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Raster img;
  img.width = width;
  img.height = height;
  img.channels = png_get_channels(png, info);
  img.pixels.resize(static_cast<std::size_t>(width) * height * img.channels);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * width * img.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (bilevel) {
    for (auto& p : img.pixels) p = p ? 1 : 0;
  }
  return img;
}

}  // namespace mvf::io
