#include "signbench/eval.hpp"

#include <algorithm>
#include <cmath>

namespace signbench {

std::vector<EvaluationPair> default_pairs() {
  return {
      {DesignSet::ATc, Design::ATc}, {DesignSet::ATn, Design::ATn},
      {DesignSet::DE, Design::DE},   {DesignSet::ATc, Design::ATn},
      {DesignSet::ATc, Design::DE},  {DesignSet::ATn, Design::DE},
      {DesignSet::DE, Design::ATc},  {DesignSet::DE, Design::ATn},
  };
}

bool pair_allowed(const EvaluationPair& pair) {
  return !(pair.train == DesignSet::ATn && pair.eval == Design::ATc);
}

Evaluation evaluate(const NetworkSpec& spec, const Params<float>& params,
                    const SampleSet& samples) {
  if (samples.count == 0) throw EmptySelection();

  Evaluation out;
  Eigen::Array<int, kNumClasses, 1> class_correct = Eigen::Array<int, kNumClasses, 1>::Zero();
  Eigen::Array<int, 5, 1> level_correct = Eigen::Array<int, 5, 1>::Zero();
  Eigen::Matrix<int, kNumClasses, kNumClasses> counts =
      Eigen::Matrix<int, kNumClasses, kNumClasses>::Zero();

  constexpr int kChunk = 256;
  for (int begin = 0; begin < samples.count; begin += kChunk) {
    const int end = std::min(samples.count, begin + kChunk);
    const Eigen::MatrixXf probs = predict_samples(spec, params, samples, begin, end);
    for (int j = 0; j < end - begin; ++j) {
      // Ties break toward the lowest class id.
      int arg = 0;
      float best = probs(0, j);
      for (int k = 1; k < spec.num_classes; ++k)
        if (probs(k, j) > best) {
          best = probs(k, j);
          arg = k;
        }
      const int truth = samples.labels[static_cast<std::size_t>(begin + j)];
      const int level = samples.levels[static_cast<std::size_t>(begin + j)];
      counts(truth, arg) += 1;
      out.report.class_counts[truth] += 1;
      if (level >= 1 && level <= 5) out.report.level_counts[level - 1] += 1;
      if (arg == truth) {
        class_correct[truth] += 1;
        if (level >= 1 && level <= 5) level_correct[level - 1] += 1;
      }
    }
  }

  out.report.total = samples.count;
  int correct = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    correct += class_correct[k];
    if (out.report.class_counts[k] > 0)
      out.report.per_class[k] =
          static_cast<double>(class_correct[k]) / out.report.class_counts[k];
  }
  out.report.overall = static_cast<double>(correct) / samples.count;
  for (int l = 0; l < 5; ++l)
    if (out.report.level_counts[l] > 0)
      out.report.per_level[l] =
          static_cast<double>(level_correct[l]) / out.report.level_counts[l];

  for (int r = 0; r < kNumClasses; ++r) {
    out.confusion.row_counts[r] = out.report.class_counts[r];
    if (out.report.class_counts[r] == 0) continue;  // flagged by zero count, never NaN
    for (int c = 0; c < kNumClasses; ++c)
      out.confusion.rows_pct(r, c) =
          100.0 * counts(r, c) / out.report.class_counts[r];
  }
  return out;
}

Evaluation evaluate(const Checkpoint& ckpt, const NetworkSpec& spec,
                    const SampleSet& samples) {
  if (ckpt.spec_digest != spec.digest())
    throw EvalError("checkpoint was trained with a different network spec");
  return evaluate(spec, ckpt.params, samples);
}

std::vector<MatrixCell> cross_design_matrix(
    const NetworkSpec& spec, const std::map<DesignSet, Checkpoint>& checkpoints,
    const std::map<Design, SampleSet>& test_sets,
    const std::vector<EvaluationPair>& pairs) {
  std::vector<MatrixCell> cells;
  cells.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (!pair_allowed(pair))
      throw EvalError("evaluation pair " + pair.label() + " is excluded");
    const auto ck = checkpoints.find(pair.train);
    if (ck == checkpoints.end()) throw MissingCheckpoint(design_set_name(pair.train));
    const auto ts = test_sets.find(pair.eval);
    if (ts == test_sets.end()) throw MissingSelection(design_name(pair.eval));
    cells.push_back({pair, evaluate(ck->second, spec, ts->second).report.overall});
  }
  return cells;
}

std::vector<RunAggregate> aggregate_runs(std::span<const std::vector<double>> runs) {
  if (runs.empty()) throw EvalError("no runs to aggregate");
  const std::size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n) throw EvalError("run result vectors differ in size");
  std::vector<RunAggregate> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RunAggregate agg{0.0, runs.front()[i], runs.front()[i]};
    for (const auto& r : runs) {
      agg.mean += r[i];
      agg.min = std::min(agg.min, r[i]);
      agg.max = std::max(agg.max, r[i]);
    }
    agg.mean /= static_cast<double>(runs.size());
    out[i] = agg;
  }
  return out;
}

std::vector<ConfusionEntry> top_confusions(const ConfusionMatrix& matrix, int k) {
  std::vector<ConfusionEntry> all;
  for (int r = 0; r < kNumClasses; ++r)
    for (int c = 0; c < kNumClasses; ++c)
      if (r != c && matrix.rows_pct(r, c) > 0.0)
        all.push_back({r, c, matrix.rows_pct(r, c)});
  std::sort(all.begin(), all.end(), [](const ConfusionEntry& a, const ConfusionEntry& b) {
    if (a.percentage != b.percentage) return a.percentage > b.percentage;
    if (a.true_class != b.true_class) return a.true_class < b.true_class;
    return a.predicted_class < b.predicted_class;
  });
  if (k >= 0 && all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  return all;
}

}  // namespace signbench
