#include "signbench/assets.hpp"
#include "signbench/rng.hpp"
#include "signbench/synthesis.hpp"

#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

using namespace signbench;

namespace {

const Catalog& test_catalog() {
  static const Catalog catalog = [] {
    const auto root = std::filesystem::temp_directory_path() / "sb_synth_assets";
    std::filesystem::remove_all(root);
    write_asset_tree(root);
    return Catalog::load(root);
  }();
  return catalog;
}

Quad unit_square() {
  return {Eigen::Vector2d{0, 0}, {1, 0}, {1, 1}, {0, 1}};
}

}  // namespace

TEST_SUITE_BEGIN("synthesis");

TEST_CASE("homography of the unit square is the identity") {
  const Homography h = homography_from_quad(unit_square());
  CHECK((h.m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("translated unit square gives a pure translation matrix") {
  // Hand-solving the 8-equation system for corners shifted by (10, 20)
  // leaves the projective row at (0, 0, 1) and puts the shift in column 3.
  Quad quad;
  const Quad base = unit_square();
  for (int i = 0; i < 4; ++i) quad[i] = base[i] + Eigen::Vector2d(10, 20);
  const Homography h = homography_from_quad(quad);
  Eigen::Matrix3d expected;
  expected << 1, 0, 10, 0, 1, 20, 0, 0, 1;
  CHECK((h.m - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("collinear corners are rejected") {
  Quad quad = {Eigen::Vector2d{0, 0}, {1, 1}, {2, 2}, {0, 5}};
  CHECK_THROWS_AS(homography_from_quad(quad), DegenerateQuad);
}

TEST_CASE("quad maps back onto itself through the solved homography") {
  CounterRng rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    Quad quad = {Eigen::Vector2d{10, 12}, {90, 8}, {95, 88}, {6, 95}};
    for (auto& q : quad) q += Eigen::Vector2d(rng.uniform(-4, 4), rng.uniform(-4, 4));
    const Homography h = homography_from_quad(quad);
    const Quad base = unit_square();
    for (int i = 0; i < 4; ++i)
      CHECK((h.map(base[static_cast<std::size_t>(i)]) - quad[static_cast<std::size_t>(i)])
                .norm() < 1e-6);
  }
}

TEST_CASE("flip mirrors the quad arithmetic") {
  SourcePatch patch;
  patch.id = 3;
  patch.shape = SignShape::round;
  patch.raster = make_image(100, 100, 3, 0.5f);
  patch.quad = {Eigen::Vector2d{30, 40}, {70, 42}, {70, 80}, {30, 78}};

  const SourcePatch flipped = flip_patch(patch);
  CHECK(flipped.flipped);
  CHECK(flipped.id == 3);
  // x -> width - x, canonical corner order restored
  CHECK(flipped.quad[0].x() == doctest::Approx(100 - 70));
  CHECK(flipped.quad[0].y() == doctest::Approx(42));
  CHECK(flipped.quad[1].x() == doctest::Approx(100 - 30));
  CHECK(flipped.quad[1].y() == doctest::Approx(40));
  CHECK(flipped.quad[2].x() == doctest::Approx(100 - 30));
  CHECK(flipped.quad[2].y() == doctest::Approx(78));
  CHECK(flipped.quad[3].x() == doctest::Approx(100 - 70));
  CHECK(flipped.quad[3].y() == doctest::Approx(80));

  CHECK_THROWS_AS(flip_patch(flipped), AlreadyFlipped);
}

TEST_CASE("flipping a symmetric raster is a no-op on pixels") {
  SourcePatch patch;
  patch.id = 0;
  patch.raster = make_image(64, 64, 3);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c)
        patch.raster.at(c, y, x) = static_cast<float>(std::min(x, 63 - x)) / 32.0f;
  patch.quad = {Eigen::Vector2d{20, 20}, {44, 20}, {44, 44}, {20, 44}};
  const SourcePatch flipped = flip_patch(patch);
  CHECK(images_equal(flipped.raster, patch.raster));
}

TEST_CASE("fully transparent pictogram leaves only the resized patch") {
  const SourcePatch patch = generate_procedural_patch(5, SignShape::round);
  PictogramAsset asset;
  asset.class_id = 0;
  asset.design = Design::ATc;
  asset.raster = make_image(100, 100, 4, 0.0f);  // alpha all zero
  const CleanImage out = embed_pictogram(patch, asset);
  CHECK(out.raster.width == 64);
  Image expected = resize_area(patch.raster, 64, 64);
  clamp01(expected);
  CHECK(images_equal(out.raster, expected));
}

TEST_CASE("affine color transform hits the closed-form value") {
  SourcePatch patch;
  patch.id = 1;
  patch.shape = SignShape::round;
  patch.raster = make_image(64, 64, 3, 0.9f);
  patch.quad = {Eigen::Vector2d{8, 8}, {56, 8}, {56, 56}, {8, 56}};
  patch.color_gain = Eigen::Vector3f::Constant(0.5f);
  patch.color_bias = Eigen::Vector3f::Constant(0.25f);

  PictogramAsset asset;
  asset.raster = make_image(100, 100, 4, 0.5f);  // mid-gray ink
  asset.raster.ch[3].setConstant(1.0f);          // fully opaque

  const CleanImage out = embed_pictogram(patch, asset);
  // 0.5 * 0.5 + 0.25 = 0.5 inside the (downscaled) quad
  CHECK(out.raster.at(0, 32, 32) == doctest::Approx(0.5f).epsilon(1e-4));
  CHECK(out.raster.at(1, 20, 40) == doctest::Approx(0.5f).epsilon(1e-4));
  // corners stay untouched patch material
  CHECK(out.raster.at(0, 0, 0) == doctest::Approx(0.9f).epsilon(1e-4));
}

TEST_CASE("axis-aligned embedding matches a nearest-pixel reference") {
  // 16x16 toy patch, black opaque pictogram into an axis-aligned quad,
  // checked against a plain rounding rasterizer, no resize.
  SourcePatch patch;
  patch.id = 2;
  patch.raster = make_image(16, 16, 3, 1.0f);
  patch.quad = {Eigen::Vector2d{4, 4}, {12, 4}, {12, 12}, {4, 12}};
  PictogramAsset asset;
  asset.raster = make_image(100, 100, 4, 0.0f);
  asset.raster.ch[3].setConstant(1.0f);  // opaque black

  const CleanImage out = embed_pictogram(patch, asset, 16);

  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const bool inside = (x + 0.5 >= 4.0 && x + 0.5 <= 12.0 && y + 0.5 >= 4.0 &&
                           y + 0.5 <= 12.0);
      const float expected = inside ? 0.0f : 1.0f;
      CHECK(out.raster.at(0, y, x) == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("embedding is deterministic") {
  const SourcePatch patch = generate_procedural_patch(9, SignShape::triangular);
  const auto& asset = test_catalog().lookup(19, Design::ATn);
  const CleanImage a = embed_pictogram(patch, asset);
  const CleanImage b = embed_pictogram(patch, asset);
  CHECK(images_equal(a.raster, b.raster));
}

TEST_CASE("designs differ only inside the pictogram quad") {
  const auto base = make_patch_set(77);
  for (const auto& patch : {base[0], base[9]}) {
    const auto wanted =
        patch.shape == SignShape::round ? SignCategory::prohibitory : SignCategory::warning;
    int class_id = -1;
    for (const auto& cls : sign_classes())
      if (cls.category == wanted) {
        class_id = cls.id;
        break;
      }
    const CleanImage a = embed_pictogram(patch, test_catalog().lookup(class_id, Design::ATc));
    const CleanImage b = embed_pictogram(patch, test_catalog().lookup(class_id, Design::DE));

    // Quad footprint at 64x64 resolution, padded by the area-filter reach.
    const double scale = 64.0 / patch.raster.width;
    double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
    for (const auto& q : patch.quad) {
      min_x = std::min(min_x, q.x() * scale);
      max_x = std::max(max_x, q.x() * scale);
      min_y = std::min(min_y, q.y() * scale);
      max_y = std::max(max_y, q.y() * scale);
    }
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const bool may_differ = (x + 1.0 >= min_x - 1 && x <= max_x + 1 &&
                                 y + 1.0 >= min_y - 1 && y <= max_y + 1);
        if (may_differ) continue;
        for (int c = 0; c < 3; ++c)
          CHECK(a.raster.at(c, y, x) == b.raster.at(c, y, x));
      }
  }
}

TEST_CASE("clean set covers every class with all patches of its shape") {
  const auto patches = with_flips(make_patch_set(42));
  const auto cleans = build_clean_set(test_catalog(), patches, Design::ATc);
  CHECK(cleans.size() == 336);

  std::map<int, int> per_class;
  std::map<int, std::multiset<int>> patch_ids_per_class;
  for (const auto& c : cleans) {
    per_class[c.class_id]++;
    patch_ids_per_class[c.class_id].insert(c.patch_id);
  }
  CHECK(per_class.size() == 24);
  for (const auto& [cls, count] : per_class) {
    (void)cls;
    CHECK(count == 14);
  }
  // Each class sees exactly the 7 ids of its shape, twice (base + flip).
  std::multiset<int> round_ids, tri_ids;
  for (int i = 0; i < 7; ++i) {
    round_ids.insert(i);
    round_ids.insert(i);
    tri_ids.insert(7 + i);
    tri_ids.insert(7 + i);
  }
  for (const auto& cls : sign_classes()) {
    const auto& expected =
        cls.category == SignCategory::prohibitory ? round_ids : tri_ids;
    CHECK(patch_ids_per_class[cls.id] == expected);
  }

  std::map<int, int> per_patch;
  for (const auto& c : cleans) per_patch[c.patch_id]++;
  for (int id = 0; id < 7; ++id) CHECK(per_patch[id] == 36);       // 18 classes x 2
  for (int id = 7; id < 14; ++id) CHECK(per_patch[id] == 12);      // 6 classes x 2
}

TEST_CASE("clean set rejects inconsistent patch collections") {
  const auto base = make_patch_set(42);
  CHECK_THROWS_AS(build_clean_set(test_catalog(), base, Design::ATc), ShapeMismatch);
}

TEST_CASE("procedural patches are deterministic and distinct") {
  const SourcePatch a = generate_procedural_patch(4, SignShape::round);
  const SourcePatch b = generate_procedural_patch(4, SignShape::round);
  CHECK(images_equal(a.raster, b.raster));
  CHECK(a.quad == b.quad);
  CHECK(a.color_gain == b.color_gain);

  const auto set = make_patch_set(0);
  REQUIRE(set.size() == 14);
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j)
      CHECK(max_abs_diff(set[i].raster, set[j].raster) > 0.0f);

  int round = 0, tri = 0;
  for (const auto& p : set) (p.shape == SignShape::round ? round : tri)++;
  CHECK(round == 7);
  CHECK(tri == 7);
}

TEST_CASE("procedural quads sit inside the sign face") {
  for (const std::uint64_t seed : {1ull, 2ull, 3ull, 17ull}) {
    for (const auto shape : {SignShape::round, SignShape::triangular}) {
      const SourcePatch patch = generate_procedural_patch(seed, shape);
      // convex and in canonical order: cross products share the sign
      const auto& q = patch.quad;
      for (int i = 0; i < 4; ++i) {
        const auto a = q[(i + 1) % 4] - q[i];
        const auto b = q[(i + 2) % 4] - q[(i + 1) % 4];
        CHECK(a.x() * b.y() - a.y() * b.x() > 0.0);
      }
      for (const auto& corner : patch.quad) {
        CHECK(corner.x() > 0);
        CHECK(corner.x() < patch.raster.width);
        CHECK(corner.y() > 0);
        CHECK(corner.y() < patch.raster.height);
      }
      CHECK((patch.color_gain.array() > 0.0f).all());
    }
  }
}

TEST_SUITE_END();
