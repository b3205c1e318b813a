#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rgk/error.hpp"

namespace rgk {

/// Binary mask, row-major, one byte per pixel (0 or 1).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
};

namespace detail {

struct PnmImage {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint8_t> data;
};

inline PnmImage read_pnm(const std::filesystem::path& path, int channels, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&] {
    skip_space();
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok.push_back(bytes[pos++]);
    }
    return tok;
  };
  auto read_int = [&] {
    const auto tok = read_token();
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
      throw IoError(path.string() + ": malformed header");
    }
    return std::stoi(tok);
  };

  PnmImage img;
  img.magic = read_token();
  if (img.magic != magic) throw IoError(path.string() + ": expected " + magic + " image");
  img.width = read_int();
  img.height = read_int();
  img.maxval = read_int();
  if (img.width <= 0 || img.height <= 0 || img.maxval <= 0 || img.maxval > 255) {
    throw IoError(path.string() + ": unsupported dimensions or maxval");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * channels;
  if (bytes.size() < pos + need) throw IoError(path.string() + ": truncated raster");
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

}  // namespace detail

/// Reads a P5 (8-bit) PGM; any non-zero pixel is foreground.
inline BinaryMask read_pgm_mask(const std::filesystem::path& path) {
  auto img = detail::read_pnm(path, 1, "P5");
  BinaryMask mask(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) mask.pixels[i] = img.data[i] ? 1 : 0;
  return mask;
}

inline std::string encode_pgm_mask(const BinaryMask& mask) {
  std::string out = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                    "\n255\n";
  for (auto p : mask.pixels) out.push_back(static_cast<char>(p ? 255 : 0));
  return out;
}

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

/// Reads a P6 (8-bit) PPM.
inline RgbImage read_ppm(const std::filesystem::path& path) {
  auto img = detail::read_pnm(path, 3, "P6");
  return {img.width, img.height, std::move(img.data)};
}

inline std::string encode_ppm(int width, int height, const std::vector<std::uint8_t>& rgb) {
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(rgb.begin(), rgb.end());
  return out;
}

}  // namespace rgk
