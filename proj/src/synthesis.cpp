#include "signbench/synthesis.hpp"

#include "signbench/rng.hpp"

#include <algorithm>
#include <cmath>

namespace signbench {

namespace {

bool collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
               const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a, v = c - a;
  const double cross = u.x() * v.y() - u.y() * v.x();
  const double scale = std::max({u.norm(), v.norm(), 1e-12});
  return std::abs(cross) < 1e-9 * scale * scale;
}

float smoothstep(float e0, float e1, float x) {
  const float t = std::clamp((x - e0) / (e1 - e0), 0.0f, 1.0f);
  return t * t * (3.0f - 2.0f * t);
}

}  // namespace

Homography Homography::inverse() const {
  Homography inv;
  inv.m = m.inverse();
  if (std::abs(inv.m(2, 2)) > 1e-12) inv.m /= inv.m(2, 2);
  return inv;
}

Homography homography_from_quad(const Quad& quad) {
  for (int i = 0; i < 4; ++i)
    if (collinear(quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]))
      throw DegenerateQuad();

  // Unknowns h11..h32 with h33 fixed to 1; two rows per correspondence.
  const std::array<Eigen::Vector2d, 4> src = {
      Eigen::Vector2d{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Eigen::Matrix<double, 8, 8> a = Eigen::Matrix<double, 8, 8>::Zero();
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double sx = src[i].x(), sy = src[i].y();
    const double dx = quad[i].x(), dy = quad[i].y();
    a.row(2 * i) << sx, sy, 1, 0, 0, 0, -sx * dx, -sy * dx;
    a.row(2 * i + 1) << 0, 0, 0, sx, sy, 1, -sx * dy, -sy * dy;
    b(2 * i) = dx;
    b(2 * i + 1) = dy;
  }
  Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 8, 8>> qr(a);
  if (qr.rank() < 8) throw DegenerateQuad();
  const Eigen::Matrix<double, 8, 1> h = qr.solve(b);
  Homography out;
  out.m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  if (std::abs(out.m.determinant()) < 1e-12) throw DegenerateQuad();
  return out;
}

SourcePatch flip_patch(const SourcePatch& patch) {
  if (patch.flipped) throw AlreadyFlipped();
  SourcePatch out = patch;
  out.raster = flip_horizontal(patch.raster);
  const double w = patch.raster.width;
  const auto mirror = [&](const Eigen::Vector2d& p) {
    return Eigen::Vector2d{w - p.x(), p.y()};
  };
  // Mirrored TR becomes the new TL and so on; canonical order restored.
  out.quad = {mirror(patch.quad[1]), mirror(patch.quad[0]),
              mirror(patch.quad[3]), mirror(patch.quad[2])};
  out.flipped = true;
  return out;
}

CleanImage embed_pictogram(const SourcePatch& patch, const PictogramAsset& asset,
                           int out_size) {
  if (asset.raster.width != kAssetSize || asset.raster.height != kAssetSize ||
      asset.raster.channels() != 4)
    throw SynthesisError("pictogram asset must be 100x100 RGBA");

  const Homography h = homography_from_quad(patch.quad);
  const Homography hinv = h.inverse();

  Image canvas = patch.raster;

  // Only pixels whose inverse image lands in the unit square can change.
  double min_x = patch.quad[0].x(), max_x = min_x;
  double min_y = patch.quad[0].y(), max_y = min_y;
  for (const auto& q : patch.quad) {
    min_x = std::min(min_x, q.x());
    max_x = std::max(max_x, q.x());
    min_y = std::min(min_y, q.y());
    max_y = std::max(max_y, q.y());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  const int x1 = std::min(canvas.width - 1, static_cast<int>(std::ceil(max_x)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  const int y1 = std::min(canvas.height - 1, static_cast<int>(std::ceil(max_y)) + 1);

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Eigen::Vector2d uv = hinv.map({x + 0.5, y + 0.5});
      if (uv.x() < 0.0 || uv.x() > 1.0 || uv.y() < 0.0 || uv.y() > 1.0) continue;
      const float fx = static_cast<float>(uv.x()) * kAssetSize;
      const float fy = static_cast<float>(uv.y()) * kAssetSize;
      const float alpha = sample_bilinear(asset.raster.ch[3], fx, fy);
      if (alpha <= 0.0f) continue;
      for (int c = 0; c < 3; ++c) {
        const float ink = sample_bilinear(asset.raster.ch[c], fx, fy);
        const float mapped = std::clamp(
            patch.color_gain[c] * ink + patch.color_bias[c], 0.0f, 1.0f);
        float& dst = canvas.at(c, y, x);
        dst = alpha * mapped + (1.0f - alpha) * dst;
      }
    }
  }

  CleanImage out;
  out.patch_id = patch.id;
  out.flipped = patch.flipped;
  out.class_id = asset.class_id;
  out.design = asset.design;
  out.raster = resize_area(canvas, out_size, out_size);
  clamp01(out.raster);
  return out;
}

std::vector<CleanImage> build_clean_set(const Catalog& catalog,
                                        std::span<const SourcePatch> patches,
                                        Design design) {
  std::array<int, kNumPatches> seen{};
  int round_ids = 0, tri_ids = 0;
  for (const auto& p : patches) {
    if (p.id < 0 || p.id >= kNumPatches)
      throw ShapeMismatch("patch id out of range");
    if (seen[static_cast<std::size_t>(p.id)]++ == 0)
      (p.shape == SignShape::round ? round_ids : tri_ids)++;
  }
  if (patches.size() != 2 * kNumPatches ||
      !std::all_of(seen.begin(), seen.end(), [](int n) { return n == 2; }) ||
      round_ids != 7 || tri_ids != 7)
    throw ShapeMismatch("expected 14 base patches plus flips, 7 per shape");

  std::vector<CleanImage> out;
  out.reserve(patches.size() * kNumClasses / 2);
  for (const auto& patch : patches) {
    const auto wanted = (patch.shape == SignShape::round)
                            ? SignCategory::prohibitory
                            : SignCategory::warning;
    for (const auto& cls : sign_classes()) {
      if (cls.category != wanted) continue;
      out.push_back(embed_pictogram(patch, catalog.lookup(cls.id, design)));
    }
  }
  return out;
}

namespace {

constexpr int kPatchSize = 160;

// Two-octave value noise on a coarse lattice, bilinearly interpolated.
Eigen::ArrayXXf value_noise(std::uint64_t key, int size, int cells) {
  Eigen::ArrayXXf grid(cells + 1, cells + 1);
  CounterRng rng(key);
  for (int gy = 0; gy <= cells; ++gy)
    for (int gx = 0; gx <= cells; ++gx)
      grid(gy, gx) = static_cast<float>(rng.next_double());
  Eigen::ArrayXXf out(size, size);
  const float step = static_cast<float>(cells) / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float gx = x * step, gy = y * step;
      const int ix = std::min(cells - 1, static_cast<int>(gx));
      const int iy = std::min(cells - 1, static_cast<int>(gy));
      const float tx = gx - ix, ty = gy - iy;
      const float top = grid(iy, ix) * (1 - tx) + grid(iy, ix + 1) * tx;
      const float bot = grid(iy + 1, ix) * (1 - tx) + grid(iy + 1, ix + 1) * tx;
      out(y, x) = top * (1 - ty) + bot * ty;
    }
  return out;
}

float tri_edge_dist(const Eigen::Vector2f& p, const Eigen::Vector2f& a,
                    const Eigen::Vector2f& b) {
  // Signed distance to line ab; positive inside when triangle vertices are
  // passed apex -> right -> left in image (y-down) coordinates.
  const Eigen::Vector2f e = b - a;
  const Eigen::Vector2f n(-e.y(), e.x());
  return n.normalized().dot(p - a);
}

}  // namespace

SourcePatch generate_procedural_patch(std::uint64_t seed, SignShape shape) {
  const std::uint64_t base =
      mix_key(mix64(seed), shape == SignShape::round ? 0x726eu : 0x7472u);
  CounterRng rng(derive_stream(base, "layout"));

  SourcePatch patch;
  patch.id = 0;
  patch.shape = shape;
  patch.flipped = false;
  patch.raster = make_image(kPatchSize, kPatchSize, 3);

  // Sky gradient over foliage noise below a jittered horizon.
  const float horizon = static_cast<float>(rng.uniform(0.52, 0.66)) * kPatchSize;
  const auto noise = value_noise(derive_stream(base, "foliage"), kPatchSize, 10);
  const auto detail = value_noise(derive_stream(base, "detail"), kPatchSize, 28);
  const float sky_r = static_cast<float>(rng.uniform(0.40, 0.55));
  const float sky_g = static_cast<float>(rng.uniform(0.55, 0.70));
  const float sky_b = static_cast<float>(rng.uniform(0.75, 0.92));
  for (int y = 0; y < kPatchSize; ++y) {
    const float t = static_cast<float>(y) / kPatchSize;
    for (int x = 0; x < kPatchSize; ++x) {
      float r, g, b;
      if (y < horizon) {
        const float lift = 0.25f * t;
        r = sky_r + lift;
        g = sky_g + lift * 0.8f;
        b = sky_b + lift * 0.4f;
      } else {
        const float n = 0.6f * noise(y, x) + 0.4f * detail(y, x);
        r = 0.10f + 0.16f * n;
        g = 0.16f + 0.26f * n;
        b = 0.08f + 0.12f * n;
      }
      patch.raster.at(0, y, x) = std::clamp(r, 0.0f, 1.0f);
      patch.raster.at(1, y, x) = std::clamp(g, 0.0f, 1.0f);
      patch.raster.at(2, y, x) = std::clamp(b, 0.0f, 1.0f);
    }
  }

  // The sign dominates the crop, as in close-range dashcam cutouts.
  const float cx = kPatchSize * static_cast<float>(rng.uniform(0.46, 0.54));
  const Eigen::Vector3f red(0.72f, 0.08f, 0.10f);
  const Eigen::Vector3f white(0.92f, 0.92f, 0.90f);
  const float aa = 1.2f;  // edge softness in pixels

  float radius = 0.0f;      // characteristic sign half-size, for jitter scale
  float inner_half = 0.0f;  // half-extent of the region the quad lives in
  Eigen::Vector2f inner_center(cx, 0.0f);

  if (shape == SignShape::round) {
    radius = kPatchSize * static_cast<float>(rng.uniform(0.37, 0.41));
    const float cy = kPatchSize * static_cast<float>(rng.uniform(0.44, 0.52));
    const float border = 0.17f * radius;
    for (int y = 0; y < kPatchSize; ++y)
      for (int x = 0; x < kPatchSize; ++x) {
        const float d = std::hypot(x + 0.5f - cx, y + 0.5f - cy);
        const float face = 1.0f - smoothstep(radius - aa, radius + aa, d);
        if (face <= 0.0f) continue;
        const float core = 1.0f - smoothstep(radius - border - aa,
                                             radius - border + aa, d);
        const Eigen::Vector3f color = red + (white - red) * core;
        for (int c = 0; c < 3; ++c) {
          float& dst = patch.raster.at(c, y, x);
          dst = face * color[c] + (1.0f - face) * dst;
        }
      }
    inner_center.y() = cy;
    inner_half = (radius - border) / std::sqrt(2.0f) * 1.04f;
  } else {
    // Point-up triangle; the pictogram fills the incircle of the white core.
    radius = kPatchSize * static_cast<float>(rng.uniform(0.34, 0.38));
    const float rr = radius * 1.38f;  // circumradius
    const float cy = kPatchSize * static_cast<float>(rng.uniform(0.52, 0.57));
    const float border = 0.14f * radius;
    const Eigen::Vector2f apex(cx, cy - rr);
    const Eigen::Vector2f left(cx - rr * 0.866f, cy + rr * 0.5f);
    const Eigen::Vector2f right(cx + rr * 0.866f, cy + rr * 0.5f);
    for (int y = 0; y < kPatchSize; ++y)
      for (int x = 0; x < kPatchSize; ++x) {
        const Eigen::Vector2f p(x + 0.5f, y + 0.5f);
        const float d = std::min({tri_edge_dist(p, apex, right),
                                  tri_edge_dist(p, right, left),
                                  tri_edge_dist(p, left, apex)});
        const float face = smoothstep(-aa, aa, d);
        if (face <= 0.0f) continue;
        const float core = smoothstep(border - aa, border + aa, d);
        const Eigen::Vector3f color = red + (white - red) * core;
        for (int c = 0; c < 3; ++c) {
          float& dst = patch.raster.at(c, y, x);
          dst = face * color[c] + (1.0f - face) * dst;
        }
      }
    // The white core is concentric with inradius rr/2 - border; the largest
    // inscribed square sits toward the base.
    const float incircle = rr * 0.5f - border;
    inner_center = Eigen::Vector2f(cx, cy + 0.28f * incircle);
    inner_half = incircle * 0.72f;
  }

  // Mild perspective: jitter each corner relative to the pictogram region,
  // capped well below 12% of the sign width.
  const double jitter_cap = 0.12 * (2.0 * radius);
  const auto jitter = [&]() {
    return std::clamp(rng.uniform(-0.06, 0.06) * 2.0 * inner_half, -jitter_cap,
                      jitter_cap);
  };
  const double hx = inner_half, hy = inner_half;
  const double qx = inner_center.x(), qy = inner_center.y();
  patch.quad = {
      Eigen::Vector2d{qx - hx + jitter(), qy - hy + jitter()},
      Eigen::Vector2d{qx + hx + jitter(), qy - hy + jitter()},
      Eigen::Vector2d{qx + hx + jitter(), qy + hy + jitter()},
      Eigen::Vector2d{qx - hx + jitter(), qy + hy + jitter()},
  };

  // Lighting moves all channels together with only a small cast on top;
  // each component still lands inside [0.7, 1.1] x [-0.1, 0.1].
  const double luminance_gain = rng.uniform(0.78, 1.02);
  const double luminance_bias = rng.uniform(-0.05, 0.05);
  for (int c = 0; c < 3; ++c) {
    patch.color_gain[c] =
        static_cast<float>(std::clamp(luminance_gain + rng.uniform(-0.06, 0.06), 0.7, 1.1));
    patch.color_bias[c] =
        static_cast<float>(std::clamp(luminance_bias + rng.uniform(-0.04, 0.04), -0.1, 0.1));
  }
  return patch;
}

std::vector<SourcePatch> make_patch_set(std::uint64_t seed) {
  std::vector<SourcePatch> patches;
  patches.reserve(kNumPatches);
  for (int i = 0; i < 7; ++i) {
    auto p = generate_procedural_patch(mix_key(seed, static_cast<std::uint64_t>(i)),
                                       SignShape::round);
    p.id = i;
    patches.push_back(std::move(p));
  }
  for (int i = 0; i < 7; ++i) {
    auto p = generate_procedural_patch(
        mix_key(seed, static_cast<std::uint64_t>(100 + i)), SignShape::triangular);
    p.id = 7 + i;
    patches.push_back(std::move(p));
  }
  return patches;
}

std::vector<SourcePatch> with_flips(const std::vector<SourcePatch>& base) {
  std::vector<SourcePatch> all = base;
  all.reserve(base.size() * 2);
  for (const auto& p : base) all.push_back(flip_patch(p));
  return all;
}

}  // namespace signbench
