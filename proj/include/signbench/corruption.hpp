#pragma once

#include "signbench/image.hpp"
#include "signbench/rng.hpp"
#include "signbench/synthesis.hpp"

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>

namespace signbench {

struct CorruptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MismatchedProvenance : CorruptionError {
  MismatchedProvenance()
      : CorruptionError("paired images disagree on (patch, flipped, class)") {}
};

enum class CorruptionKind : int {
  contrast = 0,
  brighten,
  darken,
  gaussian_noise,
  spatter,
  shadow,
  rain,
  motion_blur,
  gaussian_blur,
  zoom_blur,
};
constexpr int kNumCorruptionKinds = 10;

std::string corruption_kind_name(CorruptionKind k);
CorruptionKind parse_corruption_kind(const std::string& s);

// One band of the distance-simulating down-sampling factor.
struct IntensityLevel {
  int level = 1;         // 1..5
  double lo = 1.0;       // inclusive
  double hi = 1.5;       // exclusive
};

std::array<IntensityLevel, 5> default_levels();

// Per-kind parameters, fully materialized at sampling time so apply() needs
// nothing beyond the spec itself.
struct ContrastParams { double factor; };
struct BrightenParams { double delta; };
struct DarkenParams { double delta; };
struct GaussianNoiseParams { double sigma; };
struct SpatterParams { double coverage; double blur_sigma; double opacity; double darkness; };
struct ShadowParams { double angle; double offset; double attenuation; double softness; };
struct RainParams { int streaks; double angle; double length; double brightness; };
struct MotionBlurParams { double length; double angle; };
struct GaussianBlurParams { double sigma; };
struct ZoomBlurParams { double max_scale; int copies; };

using KindParams =
    std::variant<ContrastParams, BrightenParams, DarkenParams, GaussianNoiseParams,
                 SpatterParams, ShadowParams, RainParams, MotionBlurParams,
                 GaussianBlurParams, ZoomBlurParams>;

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::contrast;
  KindParams params = ContrastParams{1.0};
  std::uint64_t noise_seed = 0;
  double downsample_factor = 1.0;
  int min_side = 4;  // floor for the down-sampled raster
};

// Sampling ranges; the intensity level only moves the down-sampling factor.
struct CorruptionConfig {
  std::array<IntensityLevel, 5> levels = default_levels();
  double contrast_lo = 0.4, contrast_hi = 1.6;
  double brighten_lo = 0.1, brighten_hi = 0.35;
  double darken_lo = 0.1, darken_hi = 0.35;
  double noise_sigma_lo = 0.02, noise_sigma_hi = 0.12;
  double blur_sigma_lo = 0.5, blur_sigma_hi = 2.0;
  double motion_len_lo = 3.0, motion_len_hi = 9.0;
  double zoom_scale_lo = 1.02, zoom_scale_hi = 1.12;
  double shadow_atten_lo = 0.3, shadow_atten_hi = 0.6;
  double shadow_softness = 4.0;
  int rain_count_lo = 20, rain_count_hi = 60;
  double rain_angle_lo_deg = 70.0, rain_angle_hi_deg = 110.0;
  double rain_length = 9.0;
  double rain_brightness = 0.25;
  double spatter_coverage_lo = 0.03, spatter_coverage_hi = 0.08;
  double spatter_blur_sigma = 2.0;
  double spatter_opacity = 0.6;
  double spatter_darkness = 0.1;
  int min_downsampled_side = 4;

  const IntensityLevel& level(int k) const;
};

// All draws are functions of (key, level, config); the design group is not
// part of the key, which is what keeps corruption identical across designs.
CorruptionSpec sample_spec(const RngKey& key, const IntensityLevel& level,
                           const CorruptionConfig& config);

// Secondary corruption first, then down-/up-scaling back to 64x64.
Image apply(const Image& clean, const CorruptionSpec& spec);

std::map<Design, Image> apply_paired(const std::map<Design, CleanImage>& cleans,
                                     const CorruptionSpec& spec);

// Stochastic fields exposed for auditing: both are functions of the spec
// alone. Zero-sized results for kinds without a field.
Eigen::ArrayXXf noise_field(const CorruptionSpec& spec, int height, int width);

std::uint64_t spec_digest(const CorruptionSpec& spec);
std::string spec_to_string(const CorruptionSpec& spec);

}  // namespace signbench
