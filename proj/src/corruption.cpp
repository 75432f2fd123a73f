#include "signbench/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

namespace signbench {

namespace {

constexpr double kPi = 3.14159265358979323846;

double u01(std::uint64_t key, std::uint64_t counter) {
  return static_cast<double>(CounterRng::at(key, counter) >> 11) * 0x1.0p-53;
}

// Reflect-border 2D convolution with a small dense kernel.
Eigen::ArrayXXf convolve(const Eigen::ArrayXXf& src, const Eigen::ArrayXXf& kernel) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  const int kh = static_cast<int>(kernel.rows());
  const int kw = static_cast<int>(kernel.cols());
  const int ry = kh / 2, rx = kw / 2;
  const auto reflect = [](int v, int n) {
    while (v < 0 || v >= n) {
      if (v < 0) v = -v - 1;
      if (v >= n) v = 2 * n - v - 1;
    }
    return v;
  };
  Eigen::ArrayXXf out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx)
          acc += kernel(ky, kx) * src(reflect(y + ky - ry, h), reflect(x + kx - rx, w));
      out(y, x) = acc;
    }
  return out;
}

Eigen::ArrayXXf gaussian_kernel_1d(double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Eigen::ArrayXXf k(1, 2 * r + 1);
  for (int i = -r; i <= r; ++i)
    k(0, i + r) = static_cast<float>(std::exp(-0.5 * (i * i) / (sigma * sigma)));
  k /= k.sum();
  return k;
}

Eigen::ArrayXXf gaussian_blur_plane(const Eigen::ArrayXXf& src, double sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const Eigen::ArrayXXf kt = k.transpose();
  return convolve(convolve(src, k), kt);
}

// Bilinear splat of points along a centered line segment.
Eigen::ArrayXXf motion_kernel(double length, double angle) {
  const int r = std::max(1, static_cast<int>(std::ceil(length / 2.0)));
  const int n = 2 * r + 1;
  Eigen::ArrayXXf k = Eigen::ArrayXXf::Zero(n, n);
  const double dx = std::cos(angle), dy = std::sin(angle);
  const int steps = std::max(2, static_cast<int>(std::ceil(length * 4)));
  for (int i = 0; i < steps; ++i) {
    const double t = -length / 2.0 + length * i / (steps - 1);
    const double px = r + t * dx, py = r + t * dy;
    const int x0 = static_cast<int>(std::floor(px));
    const int y0 = static_cast<int>(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    for (int oy = 0; oy <= 1; ++oy)
      for (int ox = 0; ox <= 1; ++ox) {
        const int xx = x0 + ox, yy = y0 + oy;
        if (xx < 0 || xx >= n || yy < 0 || yy >= n) continue;
        k(yy, xx) += static_cast<float>((ox ? fx : 1 - fx) * (oy ? fy : 1 - fy));
      }
  }
  k /= k.sum();
  return k;
}

Eigen::ArrayXXf gaussian_field(std::uint64_t key, int h, int w) {
  Eigen::ArrayXXf out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint64_t p = static_cast<std::uint64_t>(y) * w + x;
      double v = u01(key, 2 * p);
      if (v <= 0.0) v = 0x1.0p-53;
      const double u = u01(key, 2 * p + 1);
      out(y, x) = static_cast<float>(std::sqrt(-2.0 * std::log(v)) *
                                     std::cos(2.0 * kPi * u));
    }
  return out;
}

Eigen::ArrayXXf rain_field(const RainParams& p, std::uint64_t seed, int h, int w) {
  const std::uint64_t key = derive_stream(seed, "rain");
  Eigen::ArrayXXf drops = Eigen::ArrayXXf::Zero(h, w);
  for (int i = 0; i < p.streaks; ++i) {
    const double px = u01(key, 2 * static_cast<std::uint64_t>(i)) * w;
    const double py = u01(key, 2 * static_cast<std::uint64_t>(i) + 1) * h;
    const int x0 = static_cast<int>(std::floor(px - 0.5));
    const int y0 = static_cast<int>(std::floor(py - 0.5));
    const double fx = px - 0.5 - x0, fy = py - 0.5 - y0;
    for (int oy = 0; oy <= 1; ++oy)
      for (int ox = 0; ox <= 1; ++ox) {
        const int xx = x0 + ox, yy = y0 + oy;
        if (xx < 0 || xx >= w || yy < 0 || yy >= h) continue;
        drops(yy, xx) += static_cast<float>((ox ? fx : 1 - fx) * (oy ? fy : 1 - fy));
      }
  }
  Eigen::ArrayXXf streaks =
      convolve(drops, motion_kernel(p.length, p.angle)) * static_cast<float>(p.length);
  return streaks.cwiseMin(1.0f);
}

Eigen::ArrayXXf spatter_mask(const SpatterParams& p, std::uint64_t seed, int h, int w) {
  const std::uint64_t key = derive_stream(seed, "spatter");
  Eigen::ArrayXXf field(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      field(y, x) =
          static_cast<float>(u01(key, static_cast<std::uint64_t>(y) * w + x));
  field = gaussian_blur_plane(field, p.blur_sigma);
  std::vector<float> sorted(field.data(), field.data() + field.size());
  std::sort(sorted.begin(), sorted.end());
  const auto idx = static_cast<std::size_t>(
      std::clamp((1.0 - p.coverage) * static_cast<double>(sorted.size()), 0.0,
                 static_cast<double>(sorted.size() - 1)));
  const float thr = sorted[idx];
  return (field > thr).cast<float>();
}

Eigen::ArrayXXf shadow_factor(const ShadowParams& p, int h, int w) {
  Eigen::ArrayXXf out(h, w);
  const double nx = std::cos(p.angle), ny = std::sin(p.angle);
  const double cx = w / 2.0, cy = h / 2.0;
  const double half = p.softness / 2.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = (x + 0.5 - cx) * nx + (y + 0.5 - cy) * ny - p.offset;
      const double t = std::clamp((d + half) / p.softness, 0.0, 1.0);
      const double s = t * t * (3.0 - 2.0 * t);
      out(y, x) = static_cast<float>(1.0 - p.attenuation * s);
    }
  return out;
}

Image zoom_blur(const Image& src, const ZoomBlurParams& p) {
  Image out = make_image(src.width, src.height, src.channels());
  const float cx = src.width / 2.0f, cy = src.height / 2.0f;
  const float inv_copies = 1.0f / static_cast<float>(p.copies);
  for (int i = 0; i < p.copies; ++i) {
    const float s = 1.0f + static_cast<float>(p.max_scale - 1.0) * i /
                               static_cast<float>(p.copies - 1);
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const float fx = cx + (x + 0.5f - cx) / s;
        const float fy = cy + (y + 0.5f - cy) / s;
        for (int c = 0; c < src.channels(); ++c)
          out.at(c, y, x) += sample_bilinear(src.ch[c], fx, fy) * inv_copies;
      }
  }
  return out;
}

Image apply_secondary(const Image& clean, const CorruptionSpec& spec) {
  Image img = clean;
  switch (spec.kind) {
    case CorruptionKind::contrast: {
      const auto& p = std::get<ContrastParams>(spec.params);
      for (auto& plane : img.ch)
        plane = 0.5f + static_cast<float>(p.factor) * (plane - 0.5f);
      break;
    }
    case CorruptionKind::brighten: {
      const auto& p = std::get<BrightenParams>(spec.params);
      for (auto& plane : img.ch) plane += static_cast<float>(p.delta);
      break;
    }
    case CorruptionKind::darken: {
      const auto& p = std::get<DarkenParams>(spec.params);
      for (auto& plane : img.ch) plane -= static_cast<float>(p.delta);
      break;
    }
    case CorruptionKind::gaussian_noise: {
      const auto& p = std::get<GaussianNoiseParams>(spec.params);
      const auto field = gaussian_field(derive_stream(spec.noise_seed, "noise"),
                                        img.height, img.width);
      for (auto& plane : img.ch) plane += static_cast<float>(p.sigma) * field;
      break;
    }
    case CorruptionKind::spatter: {
      const auto& p = std::get<SpatterParams>(spec.params);
      const auto mask = spatter_mask(p, spec.noise_seed, img.height, img.width);
      const auto blend = (static_cast<float>(p.opacity) * mask).eval();
      for (auto& plane : img.ch)
        plane = (1.0f - blend) * plane + blend * static_cast<float>(p.darkness);
      break;
    }
    case CorruptionKind::shadow: {
      const auto& p = std::get<ShadowParams>(spec.params);
      const auto factor = shadow_factor(p, img.height, img.width);
      for (auto& plane : img.ch) plane *= factor;
      break;
    }
    case CorruptionKind::rain: {
      const auto& p = std::get<RainParams>(spec.params);
      const auto field = rain_field(p, spec.noise_seed, img.height, img.width);
      for (auto& plane : img.ch) plane += static_cast<float>(p.brightness) * field;
      break;
    }
    case CorruptionKind::motion_blur: {
      const auto& p = std::get<MotionBlurParams>(spec.params);
      const auto kernel = motion_kernel(p.length, p.angle);
      for (auto& plane : img.ch) plane = convolve(plane, kernel);
      break;
    }
    case CorruptionKind::gaussian_blur: {
      const auto& p = std::get<GaussianBlurParams>(spec.params);
      for (auto& plane : img.ch) plane = gaussian_blur_plane(plane, p.sigma);
      break;
    }
    case CorruptionKind::zoom_blur: {
      img = zoom_blur(img, std::get<ZoomBlurParams>(spec.params));
      break;
    }
  }
  clamp01(img);
  return img;
}

}  // namespace

std::string corruption_kind_name(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::brighten: return "brighten";
    case CorruptionKind::darken: return "darken";
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::spatter: return "spatter";
    case CorruptionKind::shadow: return "shadow";
    case CorruptionKind::rain: return "rain";
    case CorruptionKind::motion_blur: return "motion_blur";
    case CorruptionKind::gaussian_blur: return "gaussian_blur";
    case CorruptionKind::zoom_blur: return "zoom_blur";
  }
  throw CorruptionError("bad corruption kind");
}

CorruptionKind parse_corruption_kind(const std::string& s) {
  for (int i = 0; i < kNumCorruptionKinds; ++i) {
    const auto k = static_cast<CorruptionKind>(i);
    if (corruption_kind_name(k) == s) return k;
  }
  throw CorruptionError("unknown corruption kind: " + s);
}

std::array<IntensityLevel, 5> default_levels() {
  return {{{1, 1.0, 1.5}, {2, 1.5, 2.5}, {3, 2.5, 4.0}, {4, 4.0, 6.0}, {5, 6.0, 8.0}}};
}

const IntensityLevel& CorruptionConfig::level(int k) const {
  if (k < 1 || k > 5) throw CorruptionError("intensity level out of range");
  return levels[static_cast<std::size_t>(k - 1)];
}

CorruptionSpec sample_spec(const RngKey& key, const IntensityLevel& level,
                           const CorruptionConfig& config) {
  CounterRng rng(derive_stream(mix_key(key.fold(), static_cast<std::uint64_t>(level.level)),
                               "corruption-spec"));
  CorruptionSpec spec;
  spec.kind = static_cast<CorruptionKind>(rng.uniform_int(0, kNumCorruptionKinds - 1));
  switch (spec.kind) {
    case CorruptionKind::contrast:
      spec.params = ContrastParams{rng.uniform(config.contrast_lo, config.contrast_hi)};
      break;
    case CorruptionKind::brighten:
      spec.params = BrightenParams{rng.uniform(config.brighten_lo, config.brighten_hi)};
      break;
    case CorruptionKind::darken:
      spec.params = DarkenParams{rng.uniform(config.darken_lo, config.darken_hi)};
      break;
    case CorruptionKind::gaussian_noise:
      spec.params =
          GaussianNoiseParams{rng.uniform(config.noise_sigma_lo, config.noise_sigma_hi)};
      break;
    case CorruptionKind::spatter:
      spec.params = SpatterParams{
          rng.uniform(config.spatter_coverage_lo, config.spatter_coverage_hi),
          config.spatter_blur_sigma, config.spatter_opacity, config.spatter_darkness};
      break;
    case CorruptionKind::shadow:
      spec.params = ShadowParams{rng.uniform(0.0, 2.0 * kPi), rng.uniform(-16.0, 16.0),
                                 rng.uniform(config.shadow_atten_lo, config.shadow_atten_hi),
                                 config.shadow_softness};
      break;
    case CorruptionKind::rain:
      spec.params = RainParams{
          rng.uniform_int(config.rain_count_lo, config.rain_count_hi),
          rng.uniform(config.rain_angle_lo_deg, config.rain_angle_hi_deg) * kPi / 180.0,
          config.rain_length, config.rain_brightness};
      break;
    case CorruptionKind::motion_blur:
      spec.params = MotionBlurParams{rng.uniform(config.motion_len_lo, config.motion_len_hi),
                                     rng.uniform(0.0, kPi)};
      break;
    case CorruptionKind::gaussian_blur:
      spec.params =
          GaussianBlurParams{rng.uniform(config.blur_sigma_lo, config.blur_sigma_hi)};
      break;
    case CorruptionKind::zoom_blur:
      spec.params =
          ZoomBlurParams{rng.uniform(config.zoom_scale_lo, config.zoom_scale_hi), 8};
      break;
  }
  spec.noise_seed = rng.next_u64();
  spec.downsample_factor = rng.uniform(level.lo, level.hi);
  spec.min_side = config.min_downsampled_side;
  return spec;
}

Image apply(const Image& clean, const CorruptionSpec& spec) {
  Image img = apply_secondary(clean, spec);
  const int side = img.width;
  const int down =
      std::max(spec.min_side, static_cast<int>(std::lround(side / spec.downsample_factor)));
  if (down < side) {
    img = resize_area(img, down, down);
    img = resize_bilinear(img, side, side);
    clamp01(img);
  }
  return img;
}

std::map<Design, Image> apply_paired(const std::map<Design, CleanImage>& cleans,
                                     const CorruptionSpec& spec) {
  if (cleans.empty()) throw CorruptionError("apply_paired: no images");
  const auto& first = cleans.begin()->second;
  for (const auto& [design, clean] : cleans) {
    (void)design;
    if (clean.patch_id != first.patch_id || clean.flipped != first.flipped ||
        clean.class_id != first.class_id)
      throw MismatchedProvenance();
  }
  std::map<Design, Image> out;
  for (const auto& [design, clean] : cleans) out.emplace(design, apply(clean.raster, spec));
  return out;
}

Eigen::ArrayXXf noise_field(const CorruptionSpec& spec, int height, int width) {
  switch (spec.kind) {
    case CorruptionKind::gaussian_noise:
      return gaussian_field(derive_stream(spec.noise_seed, "noise"), height, width);
    case CorruptionKind::rain:
      return rain_field(std::get<RainParams>(spec.params), spec.noise_seed, height, width);
    case CorruptionKind::spatter:
      return spatter_mask(std::get<SpatterParams>(spec.params), spec.noise_seed, height,
                          width);
    case CorruptionKind::shadow:
      return shadow_factor(std::get<ShadowParams>(spec.params), height, width);
    default:
      return Eigen::ArrayXXf();
  }
}

std::string spec_to_string(const CorruptionSpec& spec) {
  char buf[256];
  std::string head = "kind=" + corruption_kind_name(spec.kind);
  std::string body;
  const auto fmt = [&](const char* format, auto... args) {
    std::snprintf(buf, sizeof(buf), format, args...);
    body = buf;
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ContrastParams>) fmt(" factor=%.17g", p.factor);
        else if constexpr (std::is_same_v<T, BrightenParams>) fmt(" delta=%.17g", p.delta);
        else if constexpr (std::is_same_v<T, DarkenParams>) fmt(" delta=%.17g", p.delta);
        else if constexpr (std::is_same_v<T, GaussianNoiseParams>) fmt(" sigma=%.17g", p.sigma);
        else if constexpr (std::is_same_v<T, SpatterParams>)
          fmt(" coverage=%.17g blur_sigma=%.17g opacity=%.17g darkness=%.17g", p.coverage,
              p.blur_sigma, p.opacity, p.darkness);
        else if constexpr (std::is_same_v<T, ShadowParams>)
          fmt(" angle=%.17g offset=%.17g attenuation=%.17g softness=%.17g", p.angle,
              p.offset, p.attenuation, p.softness);
        else if constexpr (std::is_same_v<T, RainParams>)
          fmt(" streaks=%d angle=%.17g length=%.17g brightness=%.17g", p.streaks, p.angle,
              p.length, p.brightness);
        else if constexpr (std::is_same_v<T, MotionBlurParams>)
          fmt(" length=%.17g angle=%.17g", p.length, p.angle);
        else if constexpr (std::is_same_v<T, GaussianBlurParams>) fmt(" sigma=%.17g", p.sigma);
        else if constexpr (std::is_same_v<T, ZoomBlurParams>)
          fmt(" max_scale=%.17g copies=%d", p.max_scale, p.copies);
      },
      spec.params);
  std::snprintf(buf, sizeof(buf), " noise_seed=%llu factor=%.17g",
                static_cast<unsigned long long>(spec.noise_seed), spec.downsample_factor);
  return head + body + buf;
}

std::uint64_t spec_digest(const CorruptionSpec& spec) {
  const auto s = spec_to_string(spec);
  return fnv1a(s);
}

}  // namespace signbench
