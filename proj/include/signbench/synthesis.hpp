#pragma once

#include "signbench/catalog.hpp"
#include "signbench/image.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace signbench {

struct SynthesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateQuad : SynthesisError {
  DegenerateQuad() : SynthesisError("quad corners are collinear or degenerate") {}
};
struct AlreadyFlipped : SynthesisError {
  AlreadyFlipped() : SynthesisError("patch is already flipped") {}
};
struct ShapeMismatch : SynthesisError {
  using SynthesisError::SynthesisError;
};

using Quad = std::array<Eigen::Vector2d, 4>;  // TL, TR, BR, BL in patch coords

// Background sign image plus the parameters needed to drop a pictogram in:
// the perspective quad of the pictogram region and a per-channel affine
// color transform matching the patch lighting.
struct SourcePatch {
  int id = 0;
  SignShape shape = SignShape::round;
  Image raster;  // RGB, >= 128x128
  Quad quad;
  Eigen::Vector3f color_gain = Eigen::Vector3f::Ones();
  Eigen::Vector3f color_bias = Eigen::Vector3f::Zero();
  bool flipped = false;
};

struct CleanImage {
  int patch_id = 0;
  bool flipped = false;
  int class_id = 0;
  Design design = Design::ATc;
  Image raster;  // 64x64 RGB
};

// 3x3 projective map, normalized so m(2,2) == 1.
struct Homography {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  Eigen::Vector2d map(const Eigen::Vector2d& p) const {
    const Eigen::Vector3d q = m * Eigen::Vector3d(p.x(), p.y(), 1.0);
    return {q.x() / q.z(), q.y() / q.z()};
  }
  Homography inverse() const;
};

// Direct linear solve mapping the unit square (0,0),(1,0),(1,1),(0,1) onto
// the quad corners in order.
Homography homography_from_quad(const Quad& quad);

SourcePatch flip_patch(const SourcePatch& patch);

constexpr int kCleanSize = 64;

CleanImage embed_pictogram(const SourcePatch& patch, const PictogramAsset& asset,
                           int out_size = kCleanSize);

// Round patches take the 18 prohibitory classes, triangular ones the 6
// warning classes: 14*18 + 14*6 = 336 clean images per design.
std::vector<CleanImage> build_clean_set(const Catalog& catalog,
                                        std::span<const SourcePatch> patches,
                                        Design design);

// Deterministic stand-in for a photograph of a real sign: textured
// background, red-bordered face, mild perspective quad, lighting transform.
SourcePatch generate_procedural_patch(std::uint64_t seed, SignShape shape);

constexpr int kNumPatches = 14;  // ids 0..6 round, 7..13 triangular

std::vector<SourcePatch> make_patch_set(std::uint64_t seed);

// Base patches followed by their flipped twins (28 total).
std::vector<SourcePatch> with_flips(const std::vector<SourcePatch>& base);

}  // namespace signbench
