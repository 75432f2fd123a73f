#pragma once

#include "signbench/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace signbench {

// Guard/usage problems map to exit code 2, computation errors to 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker count comes from SIGNBENCH_WORKERS only; it may change wall time,
// never bytes.
int worker_count();

enum class TrainScope { all, per_level };

struct ExperimentPaths {
  std::filesystem::path work;

  std::filesystem::path data() const { return work / "data"; }
  std::filesystem::path patches() const { return work / "patches"; }
  std::filesystem::path clean() const { return work / "clean"; }
  std::filesystem::path checkpoints() const { return work / "checkpoints"; }
  std::filesystem::path reports() const { return work / "reports"; }
  std::filesystem::path explanations() const { return work / "explanations"; }

  std::filesystem::path checkpoint_file(int run, DesignSet design,
                                        std::optional<int> level) const;
};

ExperimentPaths paths_for(const ExperimentConfig& config);

void cmd_generate(const ExperimentConfig& config, bool force);

void cmd_train(const ExperimentConfig& config, TrainScope scope,
               const std::vector<DesignSet>& design_filter = {},
               std::optional<int> run_filter = std::nullopt);

void cmd_evaluate(const ExperimentConfig& config);

void cmd_explain(const ExperimentConfig& config);

void cmd_report(const ExperimentConfig& config);

}  // namespace signbench
