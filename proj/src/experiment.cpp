#include "signbench/experiment.hpp"

#include "signbench/assets.hpp"
#include "signbench/png_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace signbench {

using nlohmann::json;

int worker_count() {
  if (const char* env = std::getenv("SIGNBENCH_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 4u));
}

ExperimentPaths paths_for(const ExperimentConfig& config) {
  return ExperimentPaths{config.work_dir()};
}

std::filesystem::path ExperimentPaths::checkpoint_file(int run, DesignSet design,
                                                       std::optional<int> level) const {
  const std::string scope = level ? "level" + std::to_string(*level) : "all";
  return checkpoints() / ("run" + std::to_string(run)) /
         (design_set_name(design) + "_" + scope + ".ckpt");
}

namespace {

std::vector<SourcePatch> experiment_patches(const ExperimentConfig& config) {
  return make_patch_set(derive_stream(mix64(config.master_seed), "patches"));
}

void write_patch_records(const ExperimentPaths& paths,
                         const std::vector<SourcePatch>& all) {
  std::filesystem::create_directories(paths.patches());
  std::ofstream f(paths.patches() / "patches.tsv");
  f << "# id\tshape\tflipped\tquad(x,y x4)\tgain\tbias\traster\n";
  for (const auto& p : all) {
    char name[64];
    std::snprintf(name, sizeof(name), "p%02d%c.png", p.id, p.flipped ? 'f' : 'b');
    write_png(paths.patches() / name, p.raster);
    f << p.id << "\t" << (p.shape == SignShape::round ? "round" : "triangular") << "\t"
      << (p.flipped ? 1 : 0) << "\t";
    char buf[256];
    for (const auto& q : p.quad) {
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f ", q.x(), q.y());
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), "\t%.6f,%.6f,%.6f\t%.6f,%.6f,%.6f\t%s\n",
                  p.color_gain[0], p.color_gain[1], p.color_gain[2], p.color_bias[0],
                  p.color_bias[1], p.color_bias[2], name);
    f << buf;
  }
}

void print_balance(const DatasetManifest& manifest) {
  std::array<int, kNumClasses> per_class{};
  std::array<int, 5> per_level{};
  for (const auto& e : manifest.entries) {
    per_class[static_cast<std::size_t>(e.class_id)]++;
    per_level[static_cast<std::size_t>(e.level - 1)]++;
  }
  std::printf("run %d %s: %zu entries, per-class %d, per-level %d\n", manifest.run,
              design_set_name(manifest.design).c_str(), manifest.entries.size(),
              per_class[0], per_level[0]);
}

SplitAssignment splits_for(const ExperimentConfig& config,
                           const std::vector<SourcePatch>& base) {
  return assign_splits(base, config.val_ids, config.test_ids);
}

DatasetManifest manifest_for(const ExperimentPaths& paths, int run, DesignSet design) {
  const auto path = manifest_path(paths.work, run, design);
  if (!std::filesystem::exists(path))
    throw UsageError("missing manifest (run generate first): " + path.string());
  return load_manifest(path);
}

// Composite manifests are assembled on demand from their members.
DatasetManifest resolve_manifest(const ExperimentPaths& paths, int run, DesignSet design) {
  if (is_base(design)) return manifest_for(paths, run, design);
  std::vector<DatasetManifest> members;
  for (const Design d : design_set_members(design))
    members.push_back(manifest_for(paths, run, as_set(d)));
  return combine_designs(members, design);
}

std::uint64_t model_seed(const ExperimentConfig& config, int run, DesignSet design,
                         std::optional<int> level) {
  std::uint64_t k = mix64(config.training.seed);
  k = mix_key(k, static_cast<std::uint64_t>(run));
  k = mix_key(k, static_cast<std::uint64_t>(design) + 101);
  k = mix_key(k, level ? static_cast<std::uint64_t>(*level) : 0u);
  return k;
}

struct TrainJob {
  int run;
  DesignSet design;
  std::optional<int> level;
};

void run_train_job(const ExperimentConfig& config, const ExperimentPaths& paths,
                   const TrainJob& job, const SplitAssignment& splits) {
  const auto manifest = resolve_manifest(paths, job.run, job.design);
  std::optional<std::vector<int>> level_filter;
  if (job.level) level_filter = std::vector<int>{*job.level};

  const auto train_entries = select(manifest, splits, Split::train, level_filter);
  const auto val_entries = select(manifest, splits, Split::val, level_filter);
  if (train_entries.empty()) throw EmptySplit("training");
  if (val_entries.empty()) throw EmptySplit("validation");

  const SampleSet train_set = load_samples(paths.work, train_entries);
  const SampleSet val_set = load_samples(paths.work, val_entries);

  NetworkSpec spec = make_network(config.architecture);
  TrainConfig tc = config.training;
  tc.seed = model_seed(config, job.run, job.design, job.level);

  const TrainResult result = train(spec, train_set, val_set, tc);
  save_checkpoint(paths.checkpoint_file(job.run, job.design, job.level),
                  result.checkpoint);
  std::printf("trained run %d %s %s: best val loss %.4f at epoch %d\n", job.run,
              design_set_name(job.design).c_str(),
              job.level ? ("level" + std::to_string(*job.level)).c_str() : "all",
              result.checkpoint.val_loss, result.checkpoint.epoch);
}

json accuracy_cell(const AccuracyReport& report) {
  json cell;
  cell["overall"] = report.overall;
  cell["total"] = report.total;
  json per_class = json::array();
  for (int k = 0; k < kNumClasses; ++k) per_class.push_back(report.per_class[k]);
  cell["per_class"] = per_class;
  json per_level = json::array();
  for (int l = 0; l < 5; ++l) per_level.push_back(report.per_level[l]);
  cell["per_level"] = per_level;
  return cell;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m) {
  std::ofstream f(path);
  f << "true\\pred";
  for (const auto& cls : sign_classes()) f << "," << cls.name;
  f << "\n";
  for (int r = 0; r < kNumClasses; ++r) {
    f << sign_class(r).name;
    for (int c = 0; c < kNumClasses; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.6f", m.rows_pct(r, c));
      f << buf;
    }
    f << "\n";
  }
}

void write_confusion_png(const std::filesystem::path& path, const ConfusionMatrix& m) {
  constexpr int cell = 12;
  Image img = make_image(kNumClasses * cell, kNumClasses * cell, 3);
  const double peak = std::max(1.0, m.rows_pct.maxCoeff());
  for (int r = 0; r < kNumClasses; ++r)
    for (int c = 0; c < kNumClasses; ++c) {
      const float t = static_cast<float>(m.rows_pct(r, c) / peak);
      // white background, red diagonal-style heat
      const float red = 1.0f;
      const float other = 1.0f - t;
      for (int y = r * cell; y < (r + 1) * cell; ++y)
        for (int x = c * cell; x < (c + 1) * cell; ++x) {
          img.at(0, y, x) = red * (0.25f + 0.75f * other) + t * 0.75f;
          img.at(1, y, x) = other;
          img.at(2, y, x) = other;
        }
    }
  clamp01(img);
  write_png(path, img);
}

std::vector<EvaluationPair> pairs_with_composites(const ExperimentConfig& config) {
  auto pairs = config.pairs;
  for (const DesignSet comp : config.composites)
    for (int d = 0; d < kNumDesigns; ++d)
      pairs.push_back({comp, static_cast<Design>(d)});
  return pairs;
}

}  // namespace

void cmd_generate(const ExperimentConfig& config, bool force) {
  const ExperimentPaths paths = paths_for(config);
  if (std::filesystem::exists(paths.data())) {
    if (!force)
      throw UsageError("output already exists, pass --force to regenerate: " +
                       paths.data().string());
    std::filesystem::remove_all(paths.data());
    std::filesystem::remove_all(paths.clean());
    std::filesystem::remove_all(paths.patches());
  }
  std::filesystem::create_directories(paths.work);
  {
    std::ofstream f(paths.work / "config.txt");
    f << config.canonical() << "\n";
  }

  const Catalog catalog = Catalog::load(config.asset_root);
  const auto base = experiment_patches(config);
  const auto all = with_flips(base);
  write_patch_records(paths, all);

  for (const Design design : config.generation.designs) {
    const auto cleans = build_clean_set(catalog, all, design);
    const auto dir = paths.clean() / design_name(design);
    std::filesystem::create_directories(dir);
    for (const auto& clean : cleans) {
      char name[128];
      std::snprintf(name, sizeof(name), "p%02d%c_%s.png", clean.patch_id,
                    clean.flipped ? 'f' : 'b', sign_class(clean.class_id).name.c_str());
      write_png(dir / name, clean.raster);
    }
  }

  BuildOptions options;
  options.workers = worker_count();
  for (int run = 0; run < config.generation.runs; ++run) {
    for (const Design design : config.generation.designs) {
      const auto manifest = build_dataset(run, design, config.generation,
                                          config.corruption, catalog, all, paths.work,
                                          options);
      save_manifest(manifest, manifest_path(paths.work, run, as_set(design)));
      print_balance(manifest);
    }
  }
}

void cmd_train(const ExperimentConfig& config, TrainScope scope,
               const std::vector<DesignSet>& design_filter,
               std::optional<int> run_filter) {
  const ExperimentPaths paths = paths_for(config);
  const auto base = experiment_patches(config);
  const SplitAssignment splits = splits_for(config, base);

  std::vector<DesignSet> designs;
  if (!design_filter.empty()) {
    designs = design_filter;
  } else {
    for (const Design d : config.generation.designs) designs.push_back(as_set(d));
    for (const DesignSet c : config.composites) designs.push_back(c);
  }

  std::vector<TrainJob> jobs;
  for (int run = 0; run < config.generation.runs; ++run) {
    if (run_filter && run != *run_filter) continue;
    for (const DesignSet design : designs) {
      if (scope == TrainScope::all) {
        jobs.push_back({run, design, std::nullopt});
      } else {
        for (int level = 1; level <= 5; ++level) jobs.push_back({run, design, level});
      }
    }
  }
  if (jobs.empty()) throw UsageError("no training jobs match the requested filters");

  // Jobs are independent; each stays single-threaded so results do not
  // depend on how many run at once.
  const int workers = std::min<int>(worker_count(), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (const auto& job : jobs) run_train_job(config, paths, job, splits);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex error_mutex;
  std::string first_error;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          run_train_job(config, paths, jobs[i], splits);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (first_error.empty()) first_error = e.what();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error(first_error);
}

void cmd_evaluate(const ExperimentConfig& config) {
  const ExperimentPaths paths = paths_for(config);
  const auto base = experiment_patches(config);
  const SplitAssignment splits = splits_for(config, base);
  const NetworkSpec spec = make_network(config.architecture);
  const auto pairs = pairs_with_composites(config);
  std::filesystem::create_directories(paths.reports());

  json doc;
  doc["runs"] = config.generation.runs;
  json cells = json::object();

  std::ofstream cells_csv(paths.reports() / "accuracy_cells.csv");
  cells_csv << "pair,scope,run,accuracy\n";

  for (int run = 0; run < config.generation.runs; ++run) {
    // Test samples per base design, full and per level.
    std::map<Design, DatasetManifest> manifests;
    std::map<Design, SampleSet> test_all;
    std::map<Design, std::array<SampleSet, 5>> test_by_level;
    for (const Design d : config.generation.designs) {
      manifests.emplace(d, manifest_for(paths, run, as_set(d)));
      const auto& manifest = manifests.at(d);
      test_all.emplace(d, load_samples(paths.work, select(manifest, splits, Split::test),
                                       worker_count()));
      for (int level = 1; level <= 5; ++level) {
        const auto entries =
            select(manifest, splits, Split::test, std::vector<int>{level});
        test_by_level[d][static_cast<std::size_t>(level - 1)] =
            load_samples(paths.work, entries, worker_count());
      }
    }

    for (const auto& pair : pairs) {
      const std::string label = pair.label();
      if (std::find(config.generation.designs.begin(), config.generation.designs.end(),
                    pair.eval) == config.generation.designs.end())
        throw MissingSelection(design_name(pair.eval));

      // All-intensities model: overall accuracy plus its own per-level curve.
      const auto all_path = paths.checkpoint_file(run, pair.train, std::nullopt);
      if (std::filesystem::exists(all_path)) {
        const Checkpoint ckpt = load_checkpoint(all_path);
        const Evaluation ev = evaluate(ckpt, spec, test_all.at(pair.eval));
        cells[label]["all"].push_back(accuracy_cell(ev.report));
        char line[160];
        std::snprintf(line, sizeof(line), "%s,all,%d,%.6f\n", label.c_str(), run,
                      ev.report.overall);
        cells_csv << line;

        char stem[128];
        std::snprintf(stem, sizeof(stem), "confusion_%s_run%d", label.c_str(), run);
        write_confusion_csv(paths.reports() / (std::string(stem) + ".csv"), ev.confusion);
        write_confusion_png(paths.reports() / (std::string(stem) + ".png"), ev.confusion);
        json conf = json::array();
        for (int r = 0; r < kNumClasses; ++r) {
          json row = json::array();
          for (int c = 0; c < kNumClasses; ++c) row.push_back(ev.confusion.rows_pct(r, c));
          conf.push_back(row);
        }
        cells[label]["confusion"].push_back(conf);
      }

      // Per-intensity models: a level-k model only ever sees level-k tests.
      for (int level = 1; level <= 5; ++level) {
        const auto level_path = paths.checkpoint_file(run, pair.train, level);
        if (!std::filesystem::exists(level_path)) continue;
        const Checkpoint ckpt = load_checkpoint(level_path);
        const auto& level_set =
            test_by_level.at(pair.eval)[static_cast<std::size_t>(level - 1)];
        for (const int sample_level : level_set.levels)
          if (sample_level != level)
            throw EvalError("cross-intensity isolation violated in test selection");
        const Evaluation ev = evaluate(ckpt, spec, level_set);
        cells[label]["level" + std::to_string(level)].push_back(ev.report.overall);
        char line[160];
        std::snprintf(line, sizeof(line), "%s,level%d,%d,%.6f\n", label.c_str(), level,
                      run, ev.report.overall);
        cells_csv << line;
      }
    }
  }
  doc["cells"] = cells;

  // Welch test over per-run accuracies of the own-design models.
  json ttests = json::array();
  {
    std::ofstream tcsv(paths.reports() / "ttest.csv");
    tcsv << "pair_a,pair_b,t,df,p\n";
    std::vector<std::pair<std::string, std::vector<double>>> own;
    for (const Design d : config.generation.designs) {
      const std::string label = design_name(d) + "-" + design_name(d);
      if (!cells.contains(label) || !cells[label].contains("all")) continue;
      std::vector<double> acc;
      for (const auto& cell : cells[label]["all"])
        acc.push_back(cell["overall"].get<double>() * 100.0);
      own.emplace_back(label, std::move(acc));
    }
    for (std::size_t i = 0; i < own.size(); ++i)
      for (std::size_t j = i + 1; j < own.size(); ++j) {
        json row;
        row["pair_a"] = own[i].first;
        row["pair_b"] = own[j].first;
        if (own[i].second.size() >= 2 && own[j].second.size() >= 2) {
          const TTestResult t = two_sided_t_test(own[i].second, own[j].second);
          row["t"] = t.t;
          row["df"] = t.df;
          row["p"] = t.p;
          char line[200];
          std::snprintf(line, sizeof(line), "%s,%s,%.8f,%.8f,%.8f\n", own[i].first.c_str(),
                        own[j].first.c_str(), t.t, t.df, t.p);
          tcsv << line;
        } else {
          row["p"] = nullptr;
          tcsv << own[i].first << "," << own[j].first << ",,,insufficient_runs\n";
        }
        ttests.push_back(row);
      }
  }
  doc["ttest"] = ttests;

  // Table-shaped matrix: per-level model columns plus the all-model column,
  // mean / min / max over runs.
  {
    std::ofstream mat(paths.reports() / "accuracy_matrix.csv");
    std::ofstream agg(paths.reports() / "accuracy_aggregate.csv");
    mat << "pair,1,2,3,4,5,All\n";
    agg << "pair,scope,mean,min,max\n";
    for (const auto& pair : pairs) {
      const std::string label = pair.label();
      mat << label;
      for (int level = 1; level <= 5; ++level) {
        const std::string key = "level" + std::to_string(level);
        if (cells.contains(label) && cells[label].contains(key)) {
          std::vector<double> acc;
          for (const auto& v : cells[label][key]) acc.push_back(v.get<double>());
          const auto stats = aggregate_runs(std::vector<std::vector<double>>{acc});
          double mean = 0, lo = acc[0], hi = acc[0];
          for (double a : acc) {
            mean += a;
            lo = std::min(lo, a);
            hi = std::max(hi, a);
          }
          mean /= static_cast<double>(acc.size());
          (void)stats;
          char buf[96];
          std::snprintf(buf, sizeof(buf), ",%.4f", mean * 100.0);
          mat << buf;
          std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f\n", label.c_str(),
                        key.c_str(), mean, lo, hi);
          agg << buf;
        } else {
          mat << ",";
        }
      }
      if (cells.contains(label) && cells[label].contains("all")) {
        std::vector<double> acc;
        for (const auto& cell : cells[label]["all"])
          acc.push_back(cell["overall"].get<double>());
        double mean = 0, lo = acc[0], hi = acc[0];
        for (double a : acc) {
          mean += a;
          lo = std::min(lo, a);
          hi = std::max(hi, a);
        }
        mean /= static_cast<double>(acc.size());
        char buf[96];
        std::snprintf(buf, sizeof(buf), ",%.4f\n", mean * 100.0);
        mat << buf;
        std::snprintf(buf, sizeof(buf), "%s,all,%.6f,%.6f,%.6f\n", label.c_str(), mean, lo,
                      hi);
        agg << buf;
      } else {
        mat << ",\n";
      }
    }
  }

  std::ofstream(paths.reports() / "evaluation.json") << doc.dump(1) << "\n";
  std::printf("evaluation written to %s\n", paths.reports().string().c_str());
}

void cmd_explain(const ExperimentConfig& config) {
  const ExperimentPaths paths = paths_for(config);
  const auto base = experiment_patches(config);
  const SplitAssignment splits = splits_for(config, base);
  const NetworkSpec spec = make_network(config.architecture);
  constexpr int run = 0;

  std::vector<DesignSet> trained;
  for (const Design d : config.generation.designs) trained.push_back(as_set(d));
  for (const DesignSet c : config.composites) trained.push_back(c);

  for (const DesignSet train_design : trained) {
    const auto ckpt_path = paths.checkpoint_file(run, train_design, std::nullopt);
    if (!std::filesystem::exists(ckpt_path))
      throw MissingCheckpoint(ckpt_path.string());
    const Checkpoint ckpt = load_checkpoint(ckpt_path);

    for (const Design eval_design : design_set_members(train_design)) {
      const auto manifest = manifest_for(paths, run, as_set(eval_design));
      const SampleSet test =
          load_samples(paths.work, select(manifest, splits, Split::test), worker_count());
      const auto maps = average_class_explanations(spec, ckpt.params, test, config.lrp);

      // Per-class mean test image as spatial context for the blended view.
      std::array<Image, kNumClasses> mean_image;
      std::array<int, kNumClasses> image_count{};
      for (int i = 0; i < test.count; ++i) {
        const int cls = test.labels[static_cast<std::size_t>(i)];
        constexpr int side = SampleSet::kSide;
        const std::uint8_t* px =
            test.pixels.data() + static_cast<std::size_t>(i) * SampleSet::kPixelsPerSample;
        if (image_count[static_cast<std::size_t>(cls)] == 0)
          mean_image[static_cast<std::size_t>(cls)] = make_image(side, side, 3, 0.0f);
        Image& acc = mean_image[static_cast<std::size_t>(cls)];
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
              acc.at(c, y, x) += static_cast<float>(px[(c * side + y) * side + x]) / 255.0f;
        image_count[static_cast<std::size_t>(cls)]++;
      }

      const std::string pair_label =
          design_set_name(train_design) + "-" + design_name(eval_design);
      const auto dir = paths.explanations() / pair_label;
      std::filesystem::create_directories(dir);
      for (const auto& [cls, map] : maps) {
        write_png(dir / (sign_class(cls).name + ".png"), render_heatmap(map));
        if (image_count[static_cast<std::size_t>(cls)] > 0) {
          Image bg = mean_image[static_cast<std::size_t>(cls)];
          for (auto& plane : bg.ch)
            plane /= static_cast<float>(image_count[static_cast<std::size_t>(cls)]);
          write_png(dir / (sign_class(cls).name + "_blend.png"),
                    render_heatmap(map, &bg));
        }
      }
      for (int cls = 0; cls < kNumClasses; ++cls)
        if (!maps.count(cls))
          std::printf("warning: %s has no correctly predicted test images for class %s\n",
                      pair_label.c_str(), sign_class(cls).name.c_str());
      std::printf("explained %s: %zu class maps\n", pair_label.c_str(), maps.size());
    }
  }
}

void cmd_report(const ExperimentConfig& config) {
  const ExperimentPaths paths = paths_for(config);
  const auto eval_path = paths.reports() / "evaluation.json";
  if (!std::filesystem::exists(eval_path))
    throw UsageError("missing evaluation results (run evaluate first): " +
                     eval_path.string());
  json doc;
  std::ifstream(eval_path) >> doc;
  const auto pairs = pairs_with_composites(config);

  std::ofstream md(paths.reports() / "summary.md");
  md << "# Pictogram machine-readability summary\n\n";
  md << "Runs: " << doc["runs"].get<int>() << ", architecture: " << config.architecture
     << ", replicas per level: " << config.generation.effective_replicas() << "\n\n";

  md << "## Accuracy (%) by corruption intensity\n\n";
  md << "Cells show mean [min, max] over runs; levels 1-5 come from per-level "
        "models, `All` from the model trained on every intensity.\n\n";
  md << "| pair | 1 | 2 | 3 | 4 | 5 | All |\n|---|---|---|---|---|---|---|\n";
  const auto& cells = doc["cells"];
  const auto fmt_cell = [&](const std::string& label, const std::string& key,
                            bool object_cells) -> std::string {
    if (!cells.contains(label) || !cells[label].contains(key)) return " ";
    std::vector<double> acc;
    for (const auto& v : cells[label][key])
      acc.push_back(100.0 * (object_cells ? v["overall"].get<double>() : v.get<double>()));
    double mean = 0, lo = acc[0], hi = acc[0];
    for (double a : acc) {
      mean += a;
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    mean /= static_cast<double>(acc.size());
    char buf[96];
    if (acc.size() > 1)
      std::snprintf(buf, sizeof(buf), "%.2f [%.2f, %.2f]", mean, lo, hi);
    else
      std::snprintf(buf, sizeof(buf), "%.2f", mean);
    return buf;
  };
  for (const auto& pair : pairs) {
    const std::string label = pair.label();
    md << "| " << label << " |";
    for (int level = 1; level <= 5; ++level)
      md << " " << fmt_cell(label, "level" + std::to_string(level), false) << " |";
    md << " " << fmt_cell(label, "all", true) << " |\n";
  }

  md << "\n## Most frequent confusions (all-intensity models, run mean)\n\n";
  for (const auto& pair : pairs) {
    const std::string label = pair.label();
    if (!cells.contains(label) || !cells[label].contains("confusion")) continue;
    ConfusionMatrix mean_conf;
    int n_runs = 0;
    for (const auto& conf : cells[label]["confusion"]) {
      for (int r = 0; r < kNumClasses; ++r)
        for (int c = 0; c < kNumClasses; ++c)
          mean_conf.rows_pct(r, c) += conf[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
      ++n_runs;
    }
    if (n_runs == 0) continue;
    mean_conf.rows_pct /= static_cast<double>(n_runs);
    md << "### " << label << "\n\n";
    const auto top = top_confusions(mean_conf, 5);
    if (top.empty()) {
      md << "No misclassifications.\n\n";
      continue;
    }
    for (const auto& entry : top) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "- %s -> %s: %.2f%%\n",
                    sign_class(entry.true_class).name.c_str(),
                    sign_class(entry.predicted_class).name.c_str(), entry.percentage);
      md << buf;
    }
    md << "\n";
  }

  md << "## Two-sided Welch t-test over run accuracies (own-design models)\n\n";
  md << "| A | B | t | df | p |\n|---|---|---|---|---|\n";
  for (const auto& row : doc["ttest"]) {
    md << "| " << row["pair_a"].get<std::string>() << " | "
       << row["pair_b"].get<std::string>() << " | ";
    if (row.contains("t") && !row["p"].is_null()) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.4f | %.3f | %.4f |", row["t"].get<double>(),
                    row["df"].get<double>(), row["p"].get<double>());
      md << buf << "\n";
    } else {
      md << "- | - | needs >= 2 runs |\n";
    }
  }

  md << "\n## Artifacts\n\n";
  md << "- `accuracy_matrix.csv`, `accuracy_aggregate.csv`, `accuracy_cells.csv`\n";
  md << "- `confusion_<pair>_run<r>.csv` / `.png`\n";
  md << "- `ttest.csv`\n";
  md << "- `../explanations/<pair>/<class>.png` (pure map and `_blend` variants)\n";
  std::printf("summary written to %s\n",
              (paths.reports() / "summary.md").string().c_str());
}

}  // namespace signbench
