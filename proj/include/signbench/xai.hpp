#pragma once

#include "signbench/dataset.hpp"
#include "signbench/image.hpp"
#include "signbench/nn.hpp"

#include <Eigen/Core>

#include <map>

namespace signbench {

// Composite rule assignment: epsilon rule on dense layers, alpha-beta on
// convolutions, box rule with pixel bounds on the input convolution.
// Bias relevance is absorbed, not redistributed.
struct LrpConfig {
  double eps_factor = 0.25;  // epsilon = eps_factor * std(layer input)
  double eps_floor = 1e-9;
  double alpha = 1.0;
  double beta = 0.0;  // alpha - beta must stay 1
  double box_lo = 0.0;
  double box_hi = 1.0;
};

struct RelevanceMap {
  Eigen::ArrayXXf values;  // (h, w), channel relevances already summed
  int target_class = 0;
  double target_logit = 0.0;
  int source_count = 1;

  double total() const { return static_cast<double>(values.sum()); }
};

// Forward pass, then relevance propagated from the target logit back to the
// pixels under the configured rules.
RelevanceMap lrp_explain(const NetworkSpec& spec, const Params<float>& params,
                         const Image& image, int target_class,
                         const LrpConfig& config = {});

RelevanceMap lrp_explain(const Checkpoint& ckpt, const NetworkSpec& spec,
                         const Image& image, int target_class,
                         const LrpConfig& config = {});

// Mean relevance map per class over the correctly predicted samples only.
// Classes without a single correct prediction are absent from the result.
std::map<int, RelevanceMap> average_class_explanations(const NetworkSpec& spec,
                                                       const Params<float>& params,
                                                       const SampleSet& samples,
                                                       const LrpConfig& config = {});

// Symmetric diverging colormap around zero (blue = against, green = none,
// red/yellow = in favor), normalized by the peak magnitude of the map.
// An all-zero map renders as the uniform mid color.
Image render_heatmap(const RelevanceMap& map, const Image* background = nullptr);

}  // namespace signbench
