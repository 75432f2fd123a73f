#include "signbench/image.hpp"

#include <algorithm>
#include <cmath>

namespace signbench {

Image make_image(int width, int height, int channels, float fill) {
  Image img;
  img.width = width;
  img.height = height;
  img.ch.reserve(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c)
    img.ch.push_back(Eigen::ArrayXXf::Constant(height, width, fill));
  return img;
}

namespace {

// Overlap weights of output cell i against source cells for a 1-D box filter.
void area_axis(int in, int out, int i, int& lo, int& hi, float* w) {
  const double scale = static_cast<double>(in) / out;
  const double a = i * scale;
  const double b = (i + 1) * scale;
  lo = static_cast<int>(std::floor(a));
  hi = std::min(in - 1, static_cast<int>(std::ceil(b)) - 1);
  for (int s = lo; s <= hi; ++s) {
    const double cover = std::min<double>(b, s + 1) - std::max<double>(a, s);
    w[s - lo] = static_cast<float>(std::max(0.0, cover) / scale);
  }
}

}  // namespace

Image resize_area(const Image& src, int out_width, int out_height) {
  if (src.width == out_width && src.height == out_height) return src;
  Image mid = make_image(out_width, src.height, src.channels());
  std::vector<float> w(static_cast<std::size_t>(src.width) + 1);
  for (int x = 0; x < out_width; ++x) {
    int lo, hi;
    area_axis(src.width, out_width, x, lo, hi, w.data());
    for (int c = 0; c < src.channels(); ++c) {
      auto col = mid.ch[c].col(x);
      col.setZero();
      for (int s = lo; s <= hi; ++s) col += src.ch[c].col(s) * w[s - lo];
    }
  }
  Image out = make_image(out_width, out_height, src.channels());
  for (int y = 0; y < out_height; ++y) {
    int lo, hi;
    area_axis(src.height, out_height, y, lo, hi, w.data());
    for (int c = 0; c < src.channels(); ++c) {
      auto row = out.ch[c].row(y);
      row.setZero();
      for (int s = lo; s <= hi; ++s) row += mid.ch[c].row(s) * w[s - lo];
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, int out_width, int out_height) {
  if (src.width == out_width && src.height == out_height) return src;
  Image out = make_image(out_width, out_height, src.channels());
  const float sx = static_cast<float>(src.width) / out_width;
  const float sy = static_cast<float>(src.height) / out_height;
  for (int y = 0; y < out_height; ++y) {
    const float fy = (y + 0.5f) * sy;
    for (int x = 0; x < out_width; ++x) {
      const float fx = (x + 0.5f) * sx;
      for (int c = 0; c < src.channels(); ++c)
        out.at(c, y, x) = sample_bilinear(src.ch[c], fx, fy);
    }
  }
  return out;
}

Image flip_horizontal(const Image& src) {
  Image out = src;
  for (auto& plane : out.ch) plane = plane.rowwise().reverse().eval();
  return out;
}

void clamp01(Image& img) {
  for (auto& plane : img.ch) plane = plane.cwiseMax(0.0f).cwiseMin(1.0f);
}

float sample_bilinear(const Eigen::ArrayXXf& plane, float fx, float fy) {
  const int w = static_cast<int>(plane.cols());
  const int h = static_cast<int>(plane.rows());
  const float gx = fx - 0.5f;
  const float gy = fy - 0.5f;
  int x0 = static_cast<int>(std::floor(gx));
  int y0 = static_cast<int>(std::floor(gy));
  const float tx = gx - x0;
  const float ty = gy - y0;
  const auto cx = [&](int v) { return std::clamp(v, 0, w - 1); };
  const auto cy = [&](int v) { return std::clamp(v, 0, h - 1); };
  const float v00 = plane(cy(y0), cx(x0));
  const float v01 = plane(cy(y0), cx(x0 + 1));
  const float v10 = plane(cy(y0 + 1), cx(x0));
  const float v11 = plane(cy(y0 + 1), cx(x0 + 1));
  const float top = v00 + (v01 - v00) * tx;
  const float bot = v10 + (v11 - v10) * tx;
  return top + (bot - top) * ty;
}

std::vector<std::uint8_t> to_bytes(const Image& img) {
  const int c = img.channels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(img.width) * img.height * c);
  std::size_t i = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int k = 0; k < c; ++k) {
        const float v = std::clamp(img.at(k, y, x), 0.0f, 1.0f) * 255.0f;
        out[i++] = static_cast<std::uint8_t>(std::nearbyint(v));
      }
  return out;
}

Image from_bytes(const std::uint8_t* data, int width, int height, int channels) {
  Image img = make_image(width, height, channels);
  std::size_t i = 0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int k = 0; k < channels; ++k)
        img.at(k, y, x) = static_cast<float>(data[i++]) / 255.0f;
  return img;
}

bool images_equal(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels() != b.channels())
    return false;
  for (int c = 0; c < a.channels(); ++c)
    if (!(a.ch[c] == b.ch[c]).all()) return false;
  return true;
}

float max_abs_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels() != b.channels())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  float m = 0.0f;
  for (int c = 0; c < a.channels(); ++c)
    m = std::max(m, (a.ch[c] - b.ch[c]).abs().maxCoeff());
  return m;
}

}  // namespace signbench
