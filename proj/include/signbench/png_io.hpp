#pragma once

#include "signbench/image.hpp"

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace signbench {

struct PngError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 8-bit RGB or RGBA, deterministic byte stream for identical pixels.
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

// Accepts non-interlaced 8-bit gray/RGB/RGBA.
Image decode_png(const std::uint8_t* data, std::size_t size);
Image read_png(const std::filesystem::path& path);

}  // namespace signbench
