#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace signbench {

// Planar float image, one Eigen array per channel, values nominally in [0,1].
// Channel arrays are indexed (y, x). 3 channels = RGB, 4 = RGBA.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Eigen::ArrayXXf> ch;

  int channels() const { return static_cast<int>(ch.size()); }
  bool empty() const { return width == 0 || height == 0 || ch.empty(); }

  float& at(int c, int y, int x) { return ch[static_cast<std::size_t>(c)](y, x); }
  float at(int c, int y, int x) const { return ch[static_cast<std::size_t>(c)](y, x); }
};

Image make_image(int width, int height, int channels, float fill = 0.0f);

// Box/area average. Exact identity when sizes match.
Image resize_area(const Image& src, int out_width, int out_height);

// Pixel-center bilinear. Exact identity when sizes match.
Image resize_bilinear(const Image& src, int out_width, int out_height);

Image flip_horizontal(const Image& src);

void clamp01(Image& img);

// Continuous-coordinate bilinear sample of one channel; (fx, fy) live in
// [0, w] x [0, h] with pixel centers at integer + 0.5. Edge-clamped.
float sample_bilinear(const Eigen::ArrayXXf& plane, float fx, float fy);

// 8-bit interleaved conversion, round half to even on store.
std::vector<std::uint8_t> to_bytes(const Image& img);
Image from_bytes(const std::uint8_t* data, int width, int height, int channels);

bool images_equal(const Image& a, const Image& b);

// Largest absolute difference over all channels; images must match in shape.
float max_abs_diff(const Image& a, const Image& b);

}  // namespace signbench
