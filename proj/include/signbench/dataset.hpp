#pragma once

#include "signbench/catalog.hpp"
#include "signbench/corruption.hpp"
#include "signbench/synthesis.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace signbench {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeCoverageViolation : DatasetError {
  ShapeCoverageViolation()
      : DatasetError("validation/test patches must cover one round and one "
                     "triangular patch each") {}
};
struct OverlappingSplits : DatasetError {
  OverlappingSplits() : DatasetError("validation and test patch ids overlap") {}
};
struct RunMismatch : DatasetError {
  RunMismatch() : DatasetError("manifests to combine come from different runs") {}
};
struct DatasetWriteError : DatasetError {
  using DatasetError::DatasetError;
};

struct GenerationConfig {
  std::uint64_t master_seed = 0;
  int runs = 3;
  int replicas_per_level = 50;
  static constexpr int kLevels = 5;
  std::vector<Design> designs = {Design::ATc, Design::ATn, Design::DE};
  // Divides replicas_per_level for reduced-size runs; every structural
  // cardinality (14 patches, 24 classes, 5 levels) stays fixed.
  int desk_scale = 1;

  int effective_replicas() const {
    return std::max(1, replicas_per_level / std::max(1, desk_scale));
  }
};

std::uint64_t generation_digest(const GenerationConfig& gen, const CorruptionConfig& cor);

struct ManifestEntry {
  std::string path;  // relative to the dataset root
  int class_id = 0;
  int patch_id = 0;
  bool flipped = false;
  int level = 1;
  int replica = 0;
  std::uint64_t spec_digest = 0;
  Design design = Design::ATc;
};

struct DatasetManifest {
  int run = 0;
  DesignSet design = DesignSet::ATc;
  std::uint64_t config_digest = 0;
  std::vector<ManifestEntry> entries;
};

enum class Split { train, val, test };
std::string split_name(Split s);

// Patch-level split; flipped patches inherit the assignment of their base.
struct SplitAssignment {
  std::array<Split, kNumPatches> by_patch{};
  Split of(int patch_id) const { return by_patch[static_cast<std::size_t>(patch_id)]; }
};

SplitAssignment assign_splits(std::span<const SourcePatch> patches,
                              std::array<int, 2> val_ids, std::array<int, 2> test_ids);

struct BuildOptions {
  bool write_images = true;  // false: manifest only, no pixel work
  int workers = 1;
};

// Generates every (clean image, level, replica) combination for one run and
// design; images land under root/data/run<r>/<design>/level<k>/.
DatasetManifest build_dataset(int run, Design design, const GenerationConfig& gen,
                              const CorruptionConfig& corruption, const Catalog& catalog,
                              std::span<const SourcePatch> patches,
                              const std::filesystem::path& root,
                              const BuildOptions& options = {});

DatasetManifest combine_designs(std::span<const DatasetManifest> manifests,
                                DesignSet composite);

// Entries matching the split (and optional level/design filters), sorted by
// entry key. An empty filter list selects nothing; no filter selects all.
std::vector<const ManifestEntry*> select(
    const DatasetManifest& manifest, const SplitAssignment& splits, Split split,
    const std::optional<std::vector<int>>& level_filter = std::nullopt,
    const std::optional<std::vector<Design>>& design_filter = std::nullopt);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& root, int run,
                                    DesignSet design);

// Decoded samples packed as 8-bit CHW pixels, ready for batching.
struct SampleSet {
  static constexpr int kSide = kCleanSize;
  static constexpr int kPixelsPerSample = 3 * kSide * kSide;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  std::vector<int> levels;
  int count = 0;
};

SampleSet load_samples(const std::filesystem::path& root,
                       std::span<const ManifestEntry* const> entries, int workers = 1);

}  // namespace signbench
