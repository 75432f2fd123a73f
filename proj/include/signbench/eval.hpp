#pragma once

#include "signbench/catalog.hpp"
#include "signbench/dataset.hpp"
#include "signbench/nn.hpp"
#include "signbench/stats.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace signbench {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySelection : EvalError {
  EmptySelection() : EvalError("evaluation selection is empty") {}
};
struct MissingCheckpoint : EvalError {
  explicit MissingCheckpoint(const std::string& which)
      : EvalError("missing checkpoint: " + which) {}
};
struct MissingSelection : EvalError {
  explicit MissingSelection(const std::string& which)
      : EvalError("missing test selection: " + which) {}
};

// Train design (possibly composite) evaluated on one base design's test set.
struct EvaluationPair {
  DesignSet train = DesignSet::ATc;
  Design eval = Design::ATc;

  std::string label() const { return design_set_name(train) + "-" + design_name(eval); }
};

// Own-design rows first, then the foreign pairs; training on the proposed
// new design is never evaluated on the current one.
std::vector<EvaluationPair> default_pairs();
bool pair_allowed(const EvaluationPair& pair);

struct AccuracyReport {
  double overall = 0.0;
  Eigen::Array<double, kNumClasses, 1> per_class = Eigen::Array<double, kNumClasses, 1>::Zero();
  Eigen::Array<int, kNumClasses, 1> class_counts = Eigen::Array<int, kNumClasses, 1>::Zero();
  Eigen::Array<double, 5, 1> per_level = Eigen::Array<double, 5, 1>::Zero();
  Eigen::Array<int, 5, 1> level_counts = Eigen::Array<int, 5, 1>::Zero();
  int total = 0;
};

// Row percentages: row = true class, column = prediction, each populated
// row sums to 100.
struct ConfusionMatrix {
  Eigen::Matrix<double, kNumClasses, kNumClasses> rows_pct =
      Eigen::Matrix<double, kNumClasses, kNumClasses>::Zero();
  Eigen::Array<int, kNumClasses, 1> row_counts = Eigen::Array<int, kNumClasses, 1>::Zero();
};

struct Evaluation {
  AccuracyReport report;
  ConfusionMatrix confusion;
};

Evaluation evaluate(const NetworkSpec& spec, const Params<float>& params,
                    const SampleSet& samples);

Evaluation evaluate(const Checkpoint& ckpt, const NetworkSpec& spec,
                    const SampleSet& samples);

struct MatrixCell {
  EvaluationPair pair;
  double accuracy = 0.0;
};

// One accuracy per requested pair; checkpoints keyed by train design, test
// samples keyed by base design. All inputs must share run and level scope.
std::vector<MatrixCell> cross_design_matrix(
    const NetworkSpec& spec, const std::map<DesignSet, Checkpoint>& checkpoints,
    const std::map<Design, SampleSet>& test_sets,
    const std::vector<EvaluationPair>& pairs = default_pairs());

struct RunAggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

std::vector<RunAggregate> aggregate_runs(std::span<const std::vector<double>> runs);

struct ConfusionEntry {
  int true_class = 0;
  int predicted_class = 0;
  double percentage = 0.0;
};

// k largest off-diagonal percentages, descending, ties by (row, col).
std::vector<ConfusionEntry> top_confusions(const ConfusionMatrix& matrix, int k);

}  // namespace signbench
