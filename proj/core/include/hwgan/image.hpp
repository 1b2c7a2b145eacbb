#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hwgan {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, height * width

  uint8_t& at(int y, int x) {
    return pixels[static_cast<std::size_t>(y * width + x)];
  }
  uint8_t at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y * width + x)];
  }
};

// 8-bit grayscale PNG (zlib-compressed), deterministic output.
void write_png_gray(const std::string& path, const GrayImage& image);

std::vector<uint8_t> encode_png_gray(const GrayImage& image);

}  // namespace hwgan
