#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "dronedet/errors.hpp"
#include "dronedet/grid.hpp"

namespace dronedet {

// Binary portable pixmap (P6, 8-bit). Values are clamped from [0,1].
inline void write_ppm(const Grid& image, const std::string& path) {
  if (image.channels() != 3)
    throw_shape("write_ppm: need a 3-channel grid, got ", image.channels());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("write_ppm: cannot open '", path, "'");
  out << "P6\n" << image.width() << " " << image.height() << "\n255\n";
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        out.put(static_cast<char>(std::lround(v * 255.0)));
      }
  if (!out.good()) throw_io("write_ppm: write failed for '", path, "'");
}

inline Grid read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("read_ppm: cannot open '", path, "'");
  std::string magic;
  in >> magic;
  if (magic != "P6") throw_io("read_ppm: '", path, "' is not a P6 pixmap");
  auto next_token = [&]() {
    std::string token;
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return token;
    }
    throw_io("read_ppm: truncated header in '", path, "'");
  };
  int width = std::stoi(next_token());
  int height = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255)
    throw_io("read_ppm: unsupported header in '", path, "'");
  in.get();  // single whitespace after maxval

  Grid image(3, height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c) {
        int byte = in.get();
        if (byte == EOF) throw_io("read_ppm: truncated pixels in '", path, "'");
        image.at(c, y, x) = static_cast<double>(byte) / maxval;
      }
  return image;
}

}  // namespace dronedet
