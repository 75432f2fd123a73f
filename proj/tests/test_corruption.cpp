#include "signbench/assets.hpp"
#include "signbench/corruption.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>

using namespace signbench;

namespace {

Image noisy_gray(std::uint64_t seed, float base = 0.5f, float amp = 0.3f) {
  Image img = make_image(64, 64, 3, base);
  CounterRng rng(seed);
  for (auto& plane : img.ch)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        plane(y, x) = base + amp * static_cast<float>(rng.uniform(-1.0, 1.0));
  return img;
}

RngKey key_of(int patch, bool flipped, int cls, int replica) {
  return RngKey{1234, 0, static_cast<std::uint16_t>(patch), flipped,
                static_cast<std::uint16_t>(cls), static_cast<std::uint32_t>(replica)};
}

}  // namespace

TEST_SUITE_BEGIN("corruption");

TEST_CASE("exactly ten corruption kinds, names round-trip") {
  for (int i = 0; i < kNumCorruptionKinds; ++i) {
    const auto kind = static_cast<CorruptionKind>(i);
    CHECK(parse_corruption_kind(corruption_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_corruption_kind("fog"), CorruptionError);
}

TEST_CASE("default factor intervals are ordered, disjoint, start at 1") {
  const auto levels = default_levels();
  CHECK(levels[0].lo == 1.0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    CHECK(levels[i].lo < levels[i].hi);
    if (i > 0) CHECK(levels[i].lo == levels[i - 1].hi);
  }
}

TEST_CASE("spec sampling is deterministic in key and level") {
  const CorruptionConfig config;
  const auto key = key_of(3, false, 11, 7);
  const auto a = sample_spec(key, config.level(3), config);
  const auto b = sample_spec(key, config.level(3), config);
  CHECK(spec_to_string(a) == spec_to_string(b));
  CHECK(spec_digest(a) == spec_digest(b));
  const auto c = sample_spec(key, config.level(4), config);
  CHECK(spec_to_string(a) != spec_to_string(c));
}

TEST_CASE("kind frequencies are uniform over 10000 draws") {
  const CorruptionConfig config;
  std::array<int, kNumCorruptionKinds> freq{};
  for (int i = 0; i < 10000; ++i) {
    const auto key = key_of(i % 14, (i / 14) % 2 == 1, i % 24, i);
    freq[static_cast<std::size_t>(sample_spec(key, config.level(3), config).kind)]++;
  }
  // binomial: mean 1000, sigma = sqrt(10000 * 0.1 * 0.9) = 30
  double chi2 = 0.0;
  for (int f : freq) {
    CHECK(f > 1000 - 3 * 30);
    CHECK(f < 1000 + 3 * 30);
    chi2 += (f - 1000.0) * (f - 1000.0) / 1000.0;
  }
  CHECK(chi2 < 21.666);  // chi-square critical value, 9 dof, alpha = 0.01
}

TEST_CASE("downsample factors respect the level interval") {
  const CorruptionConfig config;
  for (int i = 0; i < 500; ++i) {
    const auto spec = sample_spec(key_of(i % 14, false, i % 24, i), config.level(1), config);
    CHECK(spec.downsample_factor >= 1.0);
    CHECK(spec.downsample_factor < 1.5);
  }
  for (int i = 0; i < 500; ++i) {
    const auto spec = sample_spec(key_of(i % 14, false, i % 24, i), config.level(5), config);
    CHECK(spec.downsample_factor >= 6.0);
    CHECK(spec.downsample_factor < 8.0);
  }
}

TEST_CASE("zero-noise zero-downsampling spec is the identity") {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::gaussian_noise;
  spec.params = GaussianNoiseParams{0.0};
  spec.noise_seed = 9;
  spec.downsample_factor = 1.0;
  const Image img = noisy_gray(5);
  CHECK(images_equal(apply(img, spec), img));
}

TEST_CASE("blurring a constant image changes nothing") {
  const Image img = make_image(64, 64, 3, 0.42f);
  CorruptionSpec spec;
  spec.kind = CorruptionKind::gaussian_blur;
  spec.params = GaussianBlurParams{1.7};
  spec.downsample_factor = 1.0;
  CHECK(max_abs_diff(apply(img, spec), img) < 1e-5f);

  spec.kind = CorruptionKind::zoom_blur;
  spec.params = ZoomBlurParams{1.1, 8};
  CHECK(max_abs_diff(apply(img, spec), img) < 1e-5f);

  spec.kind = CorruptionKind::motion_blur;
  spec.params = MotionBlurParams{7.0, 0.6};
  CHECK(max_abs_diff(apply(img, spec), img) < 1e-5f);
}

TEST_CASE("gaussian noise has the sampled moments") {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::gaussian_noise;
  spec.params = GaussianNoiseParams{0.1};
  spec.noise_seed = 4242;
  spec.downsample_factor = 1.0;
  const Image img = make_image(64, 64, 3, 0.5f);
  const Image out = apply(img, spec);
  const double mean = static_cast<double>(out.ch[0].mean());
  const double sd =
      std::sqrt(static_cast<double>((out.ch[0] - out.ch[0].mean()).square().mean()));
  CHECK(std::abs(mean - 0.5) < 0.01);
  CHECK(std::abs(sd - 0.1) < 0.015);
}

TEST_CASE("contrast hits the closed form") {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::contrast;
  spec.params = ContrastParams{1.5};
  spec.downsample_factor = 1.0;
  Image img = make_image(64, 64, 3, 0.3f);
  const Image out = apply(img, spec);
  CHECK(out.at(0, 10, 10) == doctest::Approx(0.5f + 1.5f * (0.3f - 0.5f)).epsilon(1e-5));
}

TEST_CASE("apply yields in-range images for every kind") {
  const CorruptionConfig config;
  const Image img = noisy_gray(8, 0.5f, 0.5f);
  for (int i = 0; i < 60; ++i) {
    const auto spec =
        sample_spec(key_of(i % 14, false, i % 24, i), config.level(1 + i % 5), config);
    const Image out = apply(img, spec);
    CHECK(out.width == 64);
    CHECK(out.height == 64);
    for (const auto& plane : out.ch) {
      CHECK(plane.minCoeff() >= 0.0f);
      CHECK(plane.maxCoeff() <= 1.0f);
    }
  }
}

TEST_CASE("paired application shares every stochastic field") {
  CleanImage base;
  base.patch_id = 2;
  base.flipped = false;
  base.class_id = 8;

  std::map<Design, CleanImage> cleans;
  for (int d = 0; d < 3; ++d) {
    CleanImage clean = base;
    clean.design = static_cast<Design>(d);
    clean.raster = noisy_gray(100 + static_cast<std::uint64_t>(d));
    cleans.emplace(clean.design, std::move(clean));
  }

  // Force a rain spec; the streak field must be pixel-identical across all
  // three designs.
  CorruptionSpec spec;
  spec.kind = CorruptionKind::rain;
  spec.params = RainParams{40, 1.48, 9.0, 0.25};
  spec.noise_seed = 777;
  spec.downsample_factor = 1.0;

  const auto outputs = apply_paired(cleans, spec);
  REQUIRE(outputs.size() == 3);

  // Identical field means out - in is the same additive pattern everywhere
  // the sum stays inside [0,1].
  const auto field = noise_field(spec, 64, 64);
  for (const auto& [design, out] : outputs) {
    const auto& in = cleans.at(design).raster;
    int checked = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const float expected = in.at(0, y, x) + 0.25f * field(y, x);
        if (expected > 1.0f) continue;
        CHECK(out.at(0, y, x) == doctest::Approx(expected).epsilon(1e-5));
        ++checked;
      }
    CHECK(checked > 3000);
  }
}

TEST_CASE("identical cleans give bit-identical corrupted outputs") {
  const CorruptionConfig config;
  const auto spec = sample_spec(key_of(1, true, 3, 9), config.level(2), config);
  CleanImage clean;
  clean.patch_id = 1;
  clean.flipped = true;
  clean.class_id = 3;
  clean.raster = noisy_gray(55);
  std::map<Design, CleanImage> cleans;
  for (int d = 0; d < 3; ++d) {
    CleanImage c = clean;
    c.design = static_cast<Design>(d);
    cleans.emplace(c.design, std::move(c));
  }
  const auto outputs = apply_paired(cleans, spec);
  CHECK(images_equal(outputs.at(Design::ATc), outputs.at(Design::ATn)));
  CHECK(images_equal(outputs.at(Design::ATc), outputs.at(Design::DE)));
}

TEST_CASE("mismatched provenance is rejected") {
  CleanImage a, b;
  a.patch_id = 1;
  a.class_id = 3;
  a.design = Design::ATc;
  a.raster = make_image(64, 64, 3, 0.5f);
  b = a;
  b.design = Design::ATn;
  b.patch_id = 2;  // different patch
  std::map<Design, CleanImage> cleans;
  cleans.emplace(a.design, a);
  cleans.emplace(b.design, b);
  CorruptionSpec spec;
  CHECK_THROWS_AS(apply_paired(cleans, spec), MismatchedProvenance);
}

TEST_CASE("stochastic fields depend only on the spec") {
  CorruptionSpec spec;
  spec.kind = CorruptionKind::spatter;
  spec.params = SpatterParams{0.05, 2.0, 0.6, 0.1};
  spec.noise_seed = 31337;
  const auto a = noise_field(spec, 64, 64);
  const auto b = noise_field(spec, 64, 64);
  CHECK((a == b).all());
  // coverage lands near the sampled fraction
  const double coverage = static_cast<double>(a.sum()) / (64.0 * 64.0);
  CHECK(coverage > 0.02);
  CHECK(coverage < 0.10);

  spec.noise_seed = 31338;
  const auto c = noise_field(spec, 64, 64);
  CHECK_FALSE((a == c).all());
}

TEST_CASE("average downsampled variance decreases with the level") {
  // Pure down-sampling: contrast with factor 1 as the secondary corruption.
  const CorruptionConfig config;
  std::array<double, 5> mean_variance{};
  std::vector<Image> images;
  for (std::uint64_t s = 0; s < 6; ++s) images.push_back(noisy_gray(900 + s, 0.5f, 0.45f));
  for (int level = 1; level <= 5; ++level) {
    double total = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      CorruptionSpec spec;
      spec.kind = CorruptionKind::contrast;
      spec.params = ContrastParams{1.0};
      spec.noise_seed = 1;
      const auto& band = config.level(level);
      spec.downsample_factor = 0.5 * (band.lo + band.hi);
      const Image out = apply(images[i], spec);
      for (const auto& plane : out.ch) {
        total += static_cast<double>((plane - plane.mean()).square().mean());
        ++n;
      }
    }
    mean_variance[static_cast<std::size_t>(level - 1)] = total / n;
  }
  for (int level = 1; level < 5; ++level)
    CHECK(mean_variance[static_cast<std::size_t>(level)] <=
          mean_variance[static_cast<std::size_t>(level - 1)] + 1e-9);
}

TEST_CASE("spec serialization carries every parameter") {
  const CorruptionConfig config;
  for (int i = 0; i < 40; ++i) {
    const auto spec =
        sample_spec(key_of(i % 14, false, i % 24, i), config.level(1 + i % 5), config);
    const auto text = spec_to_string(spec);
    CHECK(text.find("kind=") == 0);
    CHECK(text.find("noise_seed=") != std::string::npos);
    CHECK(text.find("factor=") != std::string::npos);
  }
}

TEST_SUITE_END();
