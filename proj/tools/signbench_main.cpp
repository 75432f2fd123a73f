#include "signbench/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kComputationError = 1;
constexpr int kUsageError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic pictogram machine-readability benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scope = "all";
  std::vector<std::string> designs;
  std::optional<int> run;
  bool force = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
  };

  auto* generate = app.add_subcommand("generate", "synthesize the corrupted datasets");
  add_common(generate);
  generate->add_flag("--force", force, "overwrite existing generated data");

  auto* train = app.add_subcommand("train", "train classifiers on the generated data");
  add_common(train);
  train->add_option("--scope", scope, "per-level or all")
      ->check(CLI::IsMember({"per-level", "all"}));
  train->add_option("--design", designs, "restrict to these design tags");
  train->add_option("--run", run, "restrict to one run index");

  auto* evaluate = app.add_subcommand("evaluate", "compute accuracy tables and confusions");
  add_common(evaluate);

  auto* explain = app.add_subcommand("explain", "relevance heatmaps per class");
  add_common(explain);

  auto* report = app.add_subcommand("report", "assemble the summary document");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    const auto config = signbench::ExperimentConfig::from_file(config_path);
    if (generate->parsed()) {
      signbench::cmd_generate(config, force);
    } else if (train->parsed()) {
      std::vector<signbench::DesignSet> filter;
      for (const auto& tag : designs) filter.push_back(signbench::parse_design_set(tag));
      const auto train_scope = (scope == "per-level") ? signbench::TrainScope::per_level
                                                      : signbench::TrainScope::all;
      signbench::cmd_train(config, train_scope, filter, run);
    } else if (evaluate->parsed()) {
      signbench::cmd_evaluate(config);
    } else if (explain->parsed()) {
      signbench::cmd_explain(config);
    } else if (report->parsed()) {
      signbench::cmd_report(config);
    }
  } catch (const signbench::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const signbench::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kComputationError;
  }
  return kOk;
}
