#pragma once

#include "signbench/corruption.hpp"
#include "signbench/dataset.hpp"
#include "signbench/eval.hpp"
#include "signbench/nn.hpp"
#include "signbench/xai.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace signbench {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Minimal INI reader: [section] headers, key = value lines, # or ; comments.
class IniFile {
 public:
  static IniFile parse(const std::string& text);
  static IniFile load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  // "lo,hi" pairs
  std::pair<double, double> get_range(const std::string& section, const std::string& key,
                                      std::pair<double, double> fallback) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const;

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Everything one experiment needs, resolved from a single file. The output
// tree is addressed by the digest of the effective settings so different
// configurations can never silently mix.
struct ExperimentConfig {
  std::uint64_t master_seed = 42;
  std::filesystem::path output_root = "out";
  std::filesystem::path asset_root = "assets";
  std::string architecture = "reference";

  GenerationConfig generation;
  std::array<int, 2> val_ids = {5, 12};
  std::array<int, 2> test_ids = {6, 13};
  CorruptionConfig corruption;
  TrainConfig training;
  std::vector<EvaluationPair> pairs = default_pairs();
  std::vector<DesignSet> composites;  // CUR / ALL checkpoints to add
  LrpConfig lrp;

  static ExperimentConfig from_file(const std::filesystem::path& path);
  static ExperimentConfig from_ini(const IniFile& ini);

  std::string canonical() const;
  std::uint64_t digest() const;
  std::filesystem::path work_dir() const;
};

}  // namespace signbench
