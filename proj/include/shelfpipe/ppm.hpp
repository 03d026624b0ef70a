#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shelfpipe/geometry.hpp"

namespace shelfpipe {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// 8-bit RGB raster. PPM P6 is the only on-disk format; it reads and writes
// with no dependencies in any language, which is the point.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3, row-major

  static Image filled(int w, int h, Rgb color);

  Rgb at(int x, int y) const {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = c.r;
    rgb[i + 1] = c.g;
    rgb[i + 2] = c.b;
  }
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);  // [x0,x1) x [y0,y1), clipped
};

std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(const std::uint8_t* data, std::size_t len);  // throws Error
Image decode_ppm(const std::vector<std::uint8_t>& buf);

void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

// Nearest-neighbor resample into the transform's square canvas. Nearest
// keeps flat color regions exact, which the color-threshold detector needs.
Image letterbox_image(const Image& src, const LetterboxTransform& t,
                      Rgb pad_color = {114, 114, 114});

}  // namespace shelfpipe
