#include "ganvert/image_io.hpp"

#include <cmath>
#include <fstream>
#include <vector>

namespace ganvert {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  for (;;) {
    const int c = in.get();
    if (c == EOF) {
      if (tok.empty()) throw image_error("ppm: truncated header");
      return tok;
    }
    if (c == '#' && tok.empty()) {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

std::size_t parse_dim(const std::string& tok, const char* what) {
  try {
    const long v = std::stol(tok);
    if (v >= 1) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw image_error("ppm: bad " + std::string(what) + " '" + tok + "'");
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw image_error("ppm: cannot open " + path);
  if (next_token(in) != "P6") throw image_error("ppm: " + path + " is not binary P6");
  const std::size_t w = parse_dim(next_token(in), "width");
  const std::size_t h = parse_dim(next_token(in), "height");
  if (next_token(in) != "255") throw image_error("ppm: only maxval 255 is supported");
  // next_token consumed exactly one whitespace byte after the maxval.

  std::vector<char> raw(3 * w * h);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw image_error("ppm: " + path + " truncated pixel data");
  }

  Tensor img({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = static_cast<double>(static_cast<unsigned char>(raw[(y * w + x) * 3 + c]));
        img.at(c, y, x) = 2.0 * v / 255.0 - 1.0;
      }
    }
  }
  return img;
}

void write_ppm(const Tensor& image, const std::string& path) {
  if (image.ndim() != 3 || image.shape[0] != 3) {
    throw image_error("ppm: need a [3, H, W] image, got " + shape_string(image.shape));
  }
  const std::size_t h = image.shape[1], w = image.shape[2];
  std::vector<char> raw(3 * w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double v = std::round((image.at(c, y, x) + 1.0) * 255.0 / 2.0);
        if (!(v >= 0.0)) v = 0.0;  // also catches NaN
        if (v > 255.0) v = 255.0;
        raw[(y * w + x) * 3 + c] = static_cast<char>(static_cast<unsigned char>(v));
      }
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.good()) throw image_error("ppm: cannot open " + path + " for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out.good()) throw image_error("ppm: write to " + path + " failed");
}

}  // namespace ganvert
