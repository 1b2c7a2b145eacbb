#include "hwgan/image.hpp"

#include <fstream>

#include <zlib.h>

#include "hwgan/error.hpp"

namespace hwgan {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& payload) {
  put_u32_be(out, static_cast<uint32_t>(payload.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + payload.size())));
  put_u32_be(out, crc);
}

}  // namespace

std::vector<uint8_t> encode_png_gray(const GrayImage& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.pixels.size() !=
          static_cast<std::size_t>(image.width) *
              static_cast<std::size_t>(image.height))
    throw InvalidArgumentError("encode_png_gray: inconsistent image size");

  // Raw scanlines, each prefixed with filter byte 0.
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(image.height) *
              (static_cast<std::size_t>(image.width) + 1));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = image.pixels.data() +
                         static_cast<std::size_t>(y) *
                             static_cast<std::size_t>(image.width);
    raw.insert(raw.end(), row, row + image.width);
  }

  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("encode_png_gray: zlib compression failed");
  compressed.resize(compressed_size);

  std::vector<uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(image.width));
  put_u32_be(ihdr, static_cast<uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});
  return out;
}

void write_png_gray(const std::string& path, const GrayImage& image) {
  const auto bytes = encode_png_gray(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgumentError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace hwgan
