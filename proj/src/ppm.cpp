#include "shelfpipe/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "shelfpipe/errors.hpp"

namespace shelfpipe {

Image Image::filled(int w, int h, Rgb color) {
  if (w <= 0 || h <= 0) throw InvalidParamsError("image dimensions must be positive");
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = color.r;
    img.rgb[i + 1] = color.g;
    img.rgb[i + 2] = color.b;
  }
  return img;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width);
  y1 = std::min(y1, height);
  for (int y = y0; y < y1; ++y) {
    std::size_t row = (static_cast<std::size_t>(y) * width + x0) * 3;
    for (int x = x0; x < x1; ++x) {
      rgb[row] = c.r;
      rgb[row + 1] = c.g;
      rgb[row + 2] = c.b;
      row += 3;
    }
  }
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  char header[64];
  int n = std::snprintf(header, sizeof header, "P6\n%d %d\n255\n", img.width, img.height);
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(n) + img.rgb.size());
  out.insert(out.end(), header, header + n);
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

namespace {

// Skips whitespace and '#' comments between header tokens.
bool next_token(const std::uint8_t* data, std::size_t len, std::size_t& pos, std::string& tok) {
  while (pos < len) {
    if (data[pos] == '#') {
      while (pos < len && data[pos] != '\n') ++pos;
    } else if (std::isspace(data[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  tok.clear();
  while (pos < len && !std::isspace(data[pos])) tok.push_back(static_cast<char>(data[pos++]));
  return !tok.empty();
}

}  // namespace

Image decode_ppm(const std::uint8_t* data, std::size_t len) {
  std::size_t pos = 0;
  std::string tok;
  if (!next_token(data, len, pos, tok) || tok != "P6") throw Error("ppm: not a P6 file");
  long w = 0, h = 0, maxval = 0;
  auto parse_long = [&](long& out) {
    if (!next_token(data, len, pos, tok)) throw Error("ppm: truncated header");
    char* end = nullptr;
    out = std::strtol(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size()) throw Error("ppm: bad header token");
  };
  parse_long(w);
  parse_long(h);
  parse_long(maxval);
  if (w <= 0 || h <= 0) throw Error("ppm: non-positive dimensions");
  if (maxval != 255) throw Error("ppm: only maxval 255 supported");
  if (pos >= len || !std::isspace(data[pos])) throw Error("ppm: missing header terminator");
  ++pos;  // single whitespace before binary data
  std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (len - pos < need) throw Error("ppm: truncated pixel data");
  Image img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.rgb.assign(data + pos, data + pos + need);
  return img;
}

Image decode_ppm(const std::vector<std::uint8_t>& buf) { return decode_ppm(buf.data(), buf.size()); }

void write_ppm(const Image& img, const std::filesystem::path& path) {
  auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(buf);
}

Image letterbox_image(const Image& src, const LetterboxTransform& t, Rgb pad_color) {
  Image canvas = Image::filled(t.input_size, t.input_size, pad_color);
  int x0 = static_cast<int>(t.pad_x);
  int y0 = static_cast<int>(t.pad_y);
  int cw = static_cast<int>(std::lround(src.width * t.scale));
  int ch = static_cast<int>(std::lround(src.height * t.scale));
  for (int y = 0; y < ch; ++y) {
    int sy = std::min(static_cast<int>(y / t.scale), src.height - 1);
    for (int x = 0; x < cw; ++x) {
      int sx = std::min(static_cast<int>(x / t.scale), src.width - 1);
      canvas.set(x0 + x, y0 + y, src.at(sx, sy));
    }
  }
  return canvas;
}

}  // namespace shelfpipe
