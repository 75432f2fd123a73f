#include "signbench/dataset.hpp"

#include "signbench/png_io.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace signbench {

namespace {

auto entry_key(const ManifestEntry& e) {
  return std::make_tuple(e.patch_id, e.flipped, e.class_id, e.level, e.replica,
                         static_cast<int>(e.design));
}

void sort_entries(std::vector<ManifestEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return entry_key(a) < entry_key(b);
            });
}

std::string corruption_config_string(const CorruptionConfig& c) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& lv : c.levels) os << "L" << lv.level << "=" << lv.lo << "," << lv.hi << ";";
  os << c.contrast_lo << " " << c.contrast_hi << " " << c.brighten_lo << " "
     << c.brighten_hi << " " << c.darken_lo << " " << c.darken_hi << " "
     << c.noise_sigma_lo << " " << c.noise_sigma_hi << " " << c.blur_sigma_lo << " "
     << c.blur_sigma_hi << " " << c.motion_len_lo << " " << c.motion_len_hi << " "
     << c.zoom_scale_lo << " " << c.zoom_scale_hi << " " << c.shadow_atten_lo << " "
     << c.shadow_atten_hi << " " << c.shadow_softness << " " << c.rain_count_lo << " "
     << c.rain_count_hi << " " << c.rain_angle_lo_deg << " " << c.rain_angle_hi_deg << " "
     << c.rain_length << " " << c.rain_brightness << " " << c.spatter_coverage_lo << " "
     << c.spatter_coverage_hi << " " << c.spatter_blur_sigma << " " << c.spatter_opacity
     << " " << c.spatter_darkness << " " << c.min_downsampled_side;
  return os.str();
}

}  // namespace

std::uint64_t generation_digest(const GenerationConfig& gen, const CorruptionConfig& cor) {
  std::ostringstream os;
  os << "seed=" << gen.master_seed << " runs=" << gen.runs
     << " replicas=" << gen.replicas_per_level << " desk=" << gen.desk_scale
     << " designs=";
  for (const auto d : gen.designs) os << design_name(d) << ",";
  os << " | " << corruption_config_string(cor);
  return fnv1a(os.str());
}

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  throw DatasetError("bad split value");
}

SplitAssignment assign_splits(std::span<const SourcePatch> patches,
                              std::array<int, 2> val_ids, std::array<int, 2> test_ids) {
  std::array<SignShape, kNumPatches> shape_of{};
  std::array<bool, kNumPatches> seen{};
  for (const auto& p : patches) {
    if (p.id < 0 || p.id >= kNumPatches) throw DatasetError("patch id out of range");
    shape_of[static_cast<std::size_t>(p.id)] = p.shape;
    seen[static_cast<std::size_t>(p.id)] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }))
    throw DatasetError("patch set does not cover all 14 ids");

  for (int v : val_ids)
    for (int t : test_ids)
      if (v == t) throw OverlappingSplits();
  const auto covers_both = [&](const std::array<int, 2>& ids) {
    int round = 0, tri = 0;
    for (int id : ids) {
      if (id < 0 || id >= kNumPatches) throw DatasetError("split patch id out of range");
      (shape_of[static_cast<std::size_t>(id)] == SignShape::round ? round : tri)++;
    }
    return round == 1 && tri == 1;
  };
  if (!covers_both(val_ids) || !covers_both(test_ids)) throw ShapeCoverageViolation();

  SplitAssignment out;
  out.by_patch.fill(Split::train);
  for (int id : val_ids) out.by_patch[static_cast<std::size_t>(id)] = Split::val;
  for (int id : test_ids) out.by_patch[static_cast<std::size_t>(id)] = Split::test;
  return out;
}

std::filesystem::path manifest_path(const std::filesystem::path& root, int run,
                                    DesignSet design) {
  return root / "data" / ("run" + std::to_string(run)) / design_set_name(design) /
         "manifest.tsv";
}

DatasetManifest build_dataset(int run, Design design, const GenerationConfig& gen,
                              const CorruptionConfig& corruption, const Catalog& catalog,
                              std::span<const SourcePatch> patches,
                              const std::filesystem::path& root,
                              const BuildOptions& options) {
  const int replicas = gen.effective_replicas();
  const int per_clean = GenerationConfig::kLevels * replicas;

  DatasetManifest manifest;
  manifest.run = run;
  manifest.design = as_set(design);
  manifest.config_digest = generation_digest(gen, corruption);

  // Clean set only has to exist when pixels are produced; the manifest and
  // all spec draws are functions of keys alone.
  std::vector<CleanImage> cleans;
  struct CleanRef {
    int patch_id;
    bool flipped;
    int class_id;
  };
  std::vector<CleanRef> refs;
  if (options.write_images) {
    cleans = build_clean_set(catalog, patches, design);
    refs.reserve(cleans.size());
    for (const auto& c : cleans) refs.push_back({c.patch_id, c.flipped, c.class_id});
  } else {
    for (const auto& patch : patches) {
      const auto wanted = (patch.shape == SignShape::round) ? SignCategory::prohibitory
                                                            : SignCategory::warning;
      for (const auto& cls : sign_classes())
        if (cls.category == wanted) refs.push_back({patch.id, patch.flipped, cls.id});
    }
  }

  const auto design_dir = manifest_path(root, run, manifest.design).parent_path();
  if (options.write_images) {
    for (int level = 1; level <= GenerationConfig::kLevels; ++level)
      std::filesystem::create_directories(design_dir / ("level" + std::to_string(level)));
  }

  manifest.entries.resize(refs.size() * static_cast<std::size_t>(per_clean));

  std::atomic<std::size_t> fail_count{0};
  std::string first_error;
  std::mutex error_mutex;

  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t ci = begin; ci < end; ++ci) {
      const auto& ref = refs[ci];
      for (int level = 1; level <= GenerationConfig::kLevels; ++level) {
        for (int rep = 0; rep < replicas; ++rep) {
          const RngKey key{gen.master_seed,
                           static_cast<std::uint32_t>(run),
                           static_cast<std::uint16_t>(ref.patch_id),
                           ref.flipped,
                           static_cast<std::uint16_t>(ref.class_id),
                           static_cast<std::uint32_t>(rep)};
          const auto spec = sample_spec(key, corruption.level(level), corruption);

          char name[128];
          std::snprintf(name, sizeof(name), "p%02d%c_%s_r%03d.png", ref.patch_id,
                        ref.flipped ? 'f' : 'b', sign_class(ref.class_id).name.c_str(),
                        rep);
          const auto rel = std::filesystem::path("data") / ("run" + std::to_string(run)) /
                           design_set_name(manifest.design) /
                           ("level" + std::to_string(level)) / name;

          ManifestEntry entry;
          entry.path = rel.generic_string();
          entry.class_id = ref.class_id;
          entry.patch_id = ref.patch_id;
          entry.flipped = ref.flipped;
          entry.level = level;
          entry.replica = rep;
          entry.spec_digest = spec_digest(spec);
          entry.design = design;
          manifest.entries[ci * per_clean + (level - 1) * replicas + rep] = entry;

          if (options.write_images) {
            try {
              write_png(root / rel, apply(cleans[ci].raster, spec));
            } catch (const std::exception& e) {
              if (fail_count++ == 0) {
                std::lock_guard<std::mutex> lock(error_mutex);
                first_error = e.what();
              }
            }
          }
        }
      }
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1 || refs.size() < 2) {
    worker(0, refs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (refs.size() + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(refs.size(), w * chunk);
      const std::size_t end = std::min(refs.size(), begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  if (fail_count > 0)
    throw DatasetWriteError("failed to write " + std::to_string(fail_count.load()) +
                            " images (first: " + first_error + ")");

  sort_entries(manifest.entries);
  return manifest;
}

DatasetManifest combine_designs(std::span<const DatasetManifest> manifests,
                                DesignSet composite) {
  if (manifests.empty()) throw DatasetError("nothing to combine");
  DatasetManifest out;
  out.run = manifests.front().run;
  out.design = composite;
  out.config_digest = manifests.front().config_digest;
  for (const auto& m : manifests) {
    if (m.run != out.run || m.config_digest != out.config_digest) throw RunMismatch();
    out.entries.insert(out.entries.end(), m.entries.begin(), m.entries.end());
  }
  sort_entries(out.entries);
  return out;
}

std::vector<const ManifestEntry*> select(
    const DatasetManifest& manifest, const SplitAssignment& splits, Split split,
    const std::optional<std::vector<int>>& level_filter,
    const std::optional<std::vector<Design>>& design_filter) {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : manifest.entries) {
    if (splits.of(e.patch_id) != split) continue;
    if (level_filter &&
        std::find(level_filter->begin(), level_filter->end(), e.level) ==
            level_filter->end())
      continue;
    if (design_filter &&
        std::find(design_filter->begin(), design_filter->end(), e.design) ==
            design_filter->end())
      continue;
    out.push_back(&e);
  }
  std::sort(out.begin(), out.end(), [](const ManifestEntry* a, const ManifestEntry* b) {
    return entry_key(*a) < entry_key(*b);
  });
  return out;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw DatasetWriteError("cannot open manifest for write: " + path.string());
  f << "# signbench manifest v1\n";
  char head[128];
  std::snprintf(head, sizeof(head), "# run=%d design=%s config_digest=%016llx\n",
                manifest.run, design_set_name(manifest.design).c_str(),
                static_cast<unsigned long long>(manifest.config_digest));
  f << head << "# path\tclass_id\tpatch_id\tflipped\tlevel\treplica\tspec_digest\tdesign\n";
  for (const auto& e : manifest.entries) {
    char line[320];
    std::snprintf(line, sizeof(line), "%s\t%d\t%d\t%d\t%d\t%d\t%016llx\t%s\n",
                  e.path.c_str(), e.class_id, e.patch_id, e.flipped ? 1 : 0, e.level,
                  e.replica, static_cast<unsigned long long>(e.spec_digest),
                  design_name(e.design).c_str());
    f << line;
  }
  if (!f) throw DatasetWriteError("short manifest write: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DatasetError("cannot open manifest: " + path.string());
  DatasetManifest out;
  std::string line;
  bool header_seen = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      unsigned long long digest = 0;
      char design[16] = {0};
      int run = 0;
      if (std::sscanf(line.c_str(), "# run=%d design=%15s config_digest=%llx", &run,
                      design, &digest) == 3) {
        out.run = run;
        out.design = parse_design_set(design);
        out.config_digest = digest;
        header_seen = true;
      }
      continue;
    }
    ManifestEntry e;
    char path_buf[256], design_buf[16];
    unsigned long long digest = 0;
    int flipped = 0;
    if (std::sscanf(line.c_str(), "%255[^\t]\t%d\t%d\t%d\t%d\t%d\t%llx\t%15s",
                    path_buf, &e.class_id, &e.patch_id, &flipped, &e.level, &e.replica,
                    &digest, design_buf) != 8)
      throw DatasetError("malformed manifest line: " + line);
    e.path = path_buf;
    e.flipped = flipped != 0;
    e.spec_digest = digest;
    e.design = parse_design(design_buf);
    out.entries.push_back(std::move(e));
  }
  if (!header_seen) throw DatasetError("manifest missing header: " + path.string());
  return out;
}

SampleSet load_samples(const std::filesystem::path& root,
                       std::span<const ManifestEntry* const> entries, int workers) {
  SampleSet set;
  set.count = static_cast<int>(entries.size());
  set.pixels.resize(entries.size() * SampleSet::kPixelsPerSample);
  set.labels.resize(entries.size());
  set.levels.resize(entries.size());

  const auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = *entries[i];
      const Image img = read_png(root / e.path);
      if (img.width != SampleSet::kSide || img.height != SampleSet::kSide ||
          img.channels() != 3)
        throw DatasetError("unexpected sample geometry: " + e.path);
      std::uint8_t* dst = set.pixels.data() + i * SampleSet::kPixelsPerSample;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < SampleSet::kSide; ++y)
          for (int x = 0; x < SampleSet::kSide; ++x)
            *dst++ = static_cast<std::uint8_t>(
                std::nearbyint(std::clamp(img.at(c, y, x), 0.0f, 1.0f) * 255.0f));
      set.labels[i] = e.class_id;
      set.levels[i] = e.level;
    }
  };

  const int n_workers = std::max(1, workers);
  if (n_workers == 1 || entries.size() < 16) {
    worker(0, entries.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (entries.size() + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      const std::size_t begin = std::min(entries.size(), w * chunk);
      const std::size_t end = std::min(entries.size(), begin + chunk);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return set;
}

}  // namespace signbench
