#include "signbench/assets.hpp"

#include "signbench/png_io.hpp"
#include "signbench/rng.hpp"

#include <algorithm>
#include <cmath>

namespace signbench {

namespace {

float coverage(float dist, float aa = 0.9f) {
  const float t = std::clamp((aa - dist) / (2.0f * aa), 0.0f, 1.0f);
  return t * t * (3.0f - 2.0f * t);
}

// Straight-alpha over-composite of constant-color ink.
void composite(Image& img, int x, int y, float cov, const Eigen::Vector3f& ink) {
  if (cov <= 0.0f) return;
  const float old_a = img.at(3, y, x);
  const float new_a = cov + old_a * (1.0f - cov);
  if (new_a <= 0.0f) return;
  for (int c = 0; c < 3; ++c) {
    const float old_c = img.at(c, y, x);
    img.at(c, y, x) = (cov * ink[c] + old_a * (1.0f - cov) * old_c) / new_a;
  }
  img.at(3, y, x) = new_a;
}

void fill_disc(Image& img, float cx, float cy, float r, const Eigen::Vector3f& ink) {
  const int x0 = std::max(0, static_cast<int>(cx - r - 2));
  const int x1 = std::min(img.width - 1, static_cast<int>(cx + r + 2));
  const int y0 = std::max(0, static_cast<int>(cy - r - 2));
  const int y1 = std::min(img.height - 1, static_cast<int>(cy + r + 2));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      composite(img, x, y, coverage(std::hypot(x + 0.5f - cx, y + 0.5f - cy) - r), ink);
}

void fill_ring(Image& img, float cx, float cy, float r, float half_w,
               const Eigen::Vector3f& ink) {
  const float outer = r + half_w;
  const int x0 = std::max(0, static_cast<int>(cx - outer - 2));
  const int x1 = std::min(img.width - 1, static_cast<int>(cx + outer + 2));
  const int y0 = std::max(0, static_cast<int>(cy - outer - 2));
  const int y1 = std::min(img.height - 1, static_cast<int>(cy + outer + 2));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float d = std::abs(std::hypot(x + 0.5f - cx, y + 0.5f - cy) - r) - half_w;
      composite(img, x, y, coverage(d), ink);
    }
}

void fill_capsule(Image& img, float x0f, float y0f, float x1f, float y1f, float half_w,
                  const Eigen::Vector3f& ink) {
  const float pad = half_w + 2.0f;
  const int x0 = std::max(0, static_cast<int>(std::min(x0f, x1f) - pad));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::max(x0f, x1f) + pad));
  const int y0 = std::max(0, static_cast<int>(std::min(y0f, y1f) - pad));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::max(y0f, y1f) + pad));
  const Eigen::Vector2f a(x0f, y0f), b(x1f, y1f);
  const Eigen::Vector2f ab = b - a;
  const float len2 = std::max(1e-6f, ab.squaredNorm());
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Eigen::Vector2f p(x + 0.5f, y + 0.5f);
      const float t = std::clamp((p - a).dot(ab) / len2, 0.0f, 1.0f);
      const float d = (p - (a + t * ab)).norm() - half_w;
      composite(img, x, y, coverage(d), ink);
    }
}

void fill_rect(Image& img, float cx, float cy, float hw, float hh,
               const Eigen::Vector3f& ink) {
  const int x0 = std::max(0, static_cast<int>(cx - hw - 2));
  const int x1 = std::min(img.width - 1, static_cast<int>(cx + hw + 2));
  const int y0 = std::max(0, static_cast<int>(cy - hh - 2));
  const int y1 = std::min(img.height - 1, static_cast<int>(cy + hh + 2));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const float dx = std::abs(x + 0.5f - cx) - hw;
      const float dy = std::abs(y + 0.5f - cy) - hh;
      const float d = std::max(dx, dy);
      composite(img, x, y, coverage(d), ink);
    }
}

enum class GlyphKind { disc, ring, h_bar, v_bar, d_bar, rect };

struct GlyphPart {
  GlyphKind kind;
  float x, y;       // anchor
  float size;       // radius / half-length
  float stroke;     // half-width for strokes and rings
  float dir;        // diagonal slope sign
  bool red;
};

struct DesignStyle {
  float stroke_mul;
  float scale;
  float jitter_amp;
};

DesignStyle style_of(Design d) {
  switch (d) {
    case Design::ATc: return {1.0f, 1.0f, 0.0f};
    case Design::ATn: return {1.55f, 0.92f, 4.5f};
    case Design::DE: return {0.72f, 1.05f, 4.5f};
  }
  return {1.0f, 1.0f, 0.0f};
}

std::vector<GlyphPart> glyph_structure(std::uint64_t stream) {
  CounterRng rng(stream);
  const int n = rng.uniform_int(3, 5);
  std::vector<GlyphPart> parts;
  parts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    GlyphPart part;
    part.kind = static_cast<GlyphKind>(rng.uniform_int(0, 5));
    part.x = static_cast<float>(rng.uniform(22.0, 78.0));
    part.y = static_cast<float>(rng.uniform(22.0, 78.0));
    part.size = static_cast<float>(rng.uniform(11.0, 26.0));
    part.stroke = static_cast<float>(rng.uniform(3.0, 5.0));
    part.dir = rng.next_double() < 0.5 ? 1.0f : -1.0f;
    part.red = rng.next_double() < 0.18;
    parts.push_back(part);
  }
  return parts;
}

// Warning pictograms render small inside the triangular face, so the six
// warning classes get fixed bold layouts instead of sampled ones; classifiers
// cannot separate sampled fine detail at that scale.
std::vector<GlyphPart> warning_glyph(int class_id) {
  // Six silhouettes chosen to stay separable after heavy down-sampling:
  // bottom block, twin uprights, hollow ring, twin blobs, centered X,
  // red block over a bar.
  switch (class_id) {
    case 18:  // road_works
      return {{GlyphKind::rect, 50, 62, 26, 5.0f, 1.0f, false}};
    case 19:  // children
      return {{GlyphKind::v_bar, 36, 48, 23, 5.6f, 1.0f, false},
              {GlyphKind::v_bar, 64, 48, 23, 5.6f, 1.0f, false}};
    case 20:  // pedestrian_crossing
      return {{GlyphKind::ring, 50, 52, 26, 5.2f, 1.0f, false}};
    case 21:  // cyclist_crossing
      return {{GlyphKind::disc, 34, 60, 21, 4.0f, 1.0f, false},
              {GlyphKind::disc, 66, 60, 21, 4.0f, 1.0f, false}};
    case 22:  // slippery
      return {{GlyphKind::d_bar, 50, 52, 25, 5.2f, 1.0f, false},
              {GlyphKind::d_bar, 50, 52, 25, 5.2f, -1.0f, false}};
    default:  // 23 wrong_way_driver
      return {{GlyphKind::rect, 50, 40, 20, 4.6f, 1.0f, true},
              {GlyphKind::h_bar, 50, 72, 26, 5.2f, 1.0f, false}};
  }
}

void render_glyph(Image& img, const std::vector<GlyphPart>& parts, Design design,
                  std::uint64_t jitter_stream) {
  const DesignStyle style = style_of(design);
  CounterRng jitter_rng(jitter_stream);
  const Eigen::Vector3f black(0.07f, 0.07f, 0.08f);
  const Eigen::Vector3f red(0.70f, 0.09f, 0.10f);
  constexpr float kCenter = 50.0f;

  for (const auto& part : parts) {
    const float jx = static_cast<float>(jitter_rng.uniform(-1.0, 1.0)) * style.jitter_amp;
    const float jy = static_cast<float>(jitter_rng.uniform(-1.0, 1.0)) * style.jitter_amp;
    const float x = kCenter + (part.x - kCenter) * style.scale + jx;
    const float y = kCenter + (part.y - kCenter) * style.scale + jy;
    const float size = part.size * style.scale;
    const float stroke = part.stroke * style.stroke_mul;
    const Eigen::Vector3f& ink = part.red ? red : black;
    switch (part.kind) {
      case GlyphKind::disc:
        fill_disc(img, x, y, size * 0.75f, ink);
        break;
      case GlyphKind::ring:
        fill_ring(img, x, y, size * 0.8f, stroke, ink);
        break;
      case GlyphKind::h_bar:
        fill_capsule(img, x - size, y, x + size, y, stroke, ink);
        break;
      case GlyphKind::v_bar:
        fill_capsule(img, x, y - size, x, y + size, stroke, ink);
        break;
      case GlyphKind::d_bar:
        fill_capsule(img, x - size * 0.8f, y - part.dir * size * 0.8f, x + size * 0.8f,
                     y + part.dir * size * 0.8f, stroke, ink);
        break;
      case GlyphKind::rect:
        fill_rect(img, x, y, size * 0.85f, size * 0.55f, ink);
        break;
    }
  }

  // Each design places a small marker of its own; its spot depends on the
  // class so it acts as a per-design detail, not a global watermark.
  CounterRng marker_rng(derive_stream(jitter_stream, "marker"));
  const float mx = static_cast<float>(marker_rng.uniform(24.0, 76.0));
  const float my = static_cast<float>(marker_rng.uniform(24.0, 76.0));
  fill_disc(img, mx, my, 4.0f * style.stroke_mul, black);
}

std::uint64_t class_stream(int class_id, const char* label) {
  return derive_stream(mix64(0x5349474eULL + static_cast<std::uint64_t>(class_id)), label);
}

std::uint64_t jitter_stream(int class_id, Design design) {
  return derive_stream(
      mix_key(mix64(0x5349474eULL + static_cast<std::uint64_t>(class_id)),
              static_cast<std::uint64_t>(design) + 17),
      "jitter");
}

}  // namespace

Image paint_pictogram(int class_id, Design design) {
  sign_class(class_id);  // validates the id
  Image img = make_image(kAssetSize, kAssetSize, 4, 0.0f);

  // wrong_way_driver has no German original: the current Austrian rendering
  // is reused verbatim.
  if (design == Design::DE && class_id == 23) return paint_pictogram(23, Design::ATc);

  if (design == Design::DE && class_id == 21) {
    // Stand-in for the replaced class: a related but distinct bold layout.
    const std::vector<GlyphPart> alt = {{GlyphKind::disc, 50, 52, 24, 4.0f, 1.0f, false},
                                        {GlyphKind::d_bar, 50, 46, 20, 4.6f, -1.0f, false}};
    render_glyph(img, alt, design, jitter_stream(class_id, design));
    return img;
  }

  const auto parts = (class_id >= 18) ? warning_glyph(class_id)
                                      : glyph_structure(class_stream(class_id, "glyph"));
  render_glyph(img, parts, design, jitter_stream(class_id, design));

  if (design == Design::DE && (class_id == 1 || class_id == 4)) {
    // Synthesized from parts of other pictograms: borrow one extra element.
    auto extra = glyph_structure(class_stream(class_id, "glyph-extra"));
    extra.resize(1);
    render_glyph(img, extra, design, derive_stream(jitter_stream(class_id, design), "x"));
  }
  return img;
}

void write_asset_tree(const std::filesystem::path& root) {
  for (int d = 0; d < kNumDesigns; ++d) {
    const auto design = static_cast<Design>(d);
    const auto dir = root / design_name(design);
    std::filesystem::create_directories(dir);
    for (const auto& cls : sign_classes())
      write_png(dir / (cls.name + ".png"), paint_pictogram(cls.id, design));
  }
}

}  // namespace signbench
