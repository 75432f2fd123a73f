#pragma once

#include "signbench/dataset.hpp"
#include "signbench/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace signbench {

struct NnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TensorShapeMismatch : NnError {
  using NnError::NnError;
};
struct NonFiniteGradient : NnError {
  NonFiniteGradient() : NnError("gradient contains non-finite values") {}
};
struct EmptySplit : NnError {
  explicit EmptySplit(const std::string& which)
      : NnError("empty " + which + " selection") {}
};
struct DivergedLoss : NnError {
  DivergedLoss() : NnError("loss became non-finite") {}
};
struct CheckpointError : NnError {
  using NnError::NnError;
};

// Flat dense tensor. Spatial activations carry shape (N, H, W, C) and store
// their values feature-major (one N*H*W plane per channel) so convolution
// patch matrices come out tall; dense stages are (N, units) with one
// contiguous column per sample. batch_from_samples / batch_from_image build
// correctly laid out inputs.
template <typename S>
struct Tensor {
  std::vector<int> shape;
  Eigen::Matrix<S, Eigen::Dynamic, 1> values;

  static Tensor zeros(std::vector<int> shape);
  Eigen::Index numel() const { return values.size(); }
  bool finite() const { return values.allFinite(); }
};

struct ConvSpec {
  int kh = 3, kw = 3;
  int in_ch = 0, out_ch = 0;
  int stride = 1, pad = 1;
};
struct ReluSpec {};
struct MaxPoolSpec {};  // 2x2, stride 2
struct FlattenSpec {};
struct DenseSpec {
  int in = 0, out = 0;
};
using LayerSpec = std::variant<ConvSpec, ReluSpec, MaxPoolSpec, FlattenSpec, DenseSpec>;

struct StageShape {
  int h = 0, w = 0, c = 0;
  bool flat = false;
  int units() const { return flat ? c : h * w * c; }
};

struct NetworkSpec {
  int input_h = 64, input_w = 64, input_c = 3;
  int num_classes = 24;
  std::vector<LayerSpec> layers;

  // Shape at every stage boundary (size layers+1); throws on inconsistency.
  std::vector<StageShape> stage_shapes() const;
  std::uint64_t digest() const;
};

// Architectures are registered by name so configs can pick them without the
// training, evaluation, or explanation paths knowing anything concrete.
NetworkSpec make_network(const std::string& name);
void register_network(const std::string& name, NetworkSpec (*factory)());
std::vector<std::string> registered_networks();

template <typename S>
struct LayerParams {
  Tensor<S> weight;  // conv: (out_ch, kh, kw, in_ch); dense: (out, in)
  Tensor<S> bias;
  bool has_params() const { return weight.numel() > 0; }
};
template <typename S>
using Params = std::vector<LayerParams<S>>;

template <typename S>
Params<S> init_params(const NetworkSpec& spec, std::uint64_t seed);

template <typename S>
Params<S> zeros_like(const Params<S>& params);

template <typename To, typename From>
Params<To> cast_params(const Params<From>& params);

// Stage activations plus max-pool winner indices, kept for backprop and for
// relevance propagation.
template <typename S>
struct ForwardTrace {
  std::vector<Tensor<S>> stage;               // stage[0] = input
  std::vector<std::vector<int>> pool_winner;  // per layer; flat index into input stage
};

template <typename S>
Tensor<S> forward(const NetworkSpec& spec, const Params<S>& params,
                  const Tensor<S>& batch, ForwardTrace<S>* trace = nullptr);

// Mean softmax cross-entropy plus gradients for every parameter.
template <typename S>
S loss_and_grad(const NetworkSpec& spec, const Params<S>& params, const Tensor<S>& batch,
                std::span<const int> labels, Params<S>& grads);

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> softmax_columns(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits);

template <typename S>
struct AdamState {
  Params<S> m, v;
  long step = 0;
  S beta1 = S(0.9), beta2 = S(0.999), epsilon = S(1e-8);
};

template <typename S>
AdamState<S> make_adam_state(const Params<S>& params);

template <typename S>
void adam_step(AdamState<S>& state, Params<S>& params, const Params<S>& grads, S lr);

struct TrainConfig {
  int epochs = 60;
  double initial_lr = 1e-3;
  int plateau_patience = 10;
  double plateau_factor = 0.2;   // keep 20%, i.e. reduce by 80%
  double min_delta = 1e-6;       // improvement must beat best by this
  int batch_size = 64;
  std::uint64_t seed = 0;
};

// Learning rate implied by a validation-loss history: one reduction per
// stall of `patience` epochs, with a cooldown of the same length.
double plateau_update(std::span<const double> history, const TrainConfig& config,
                      double initial_lr);

struct Checkpoint {
  std::uint64_t spec_digest = 0;
  Params<float> params;
  int epoch = -1;
  double val_loss = std::numeric_limits<double>::infinity();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::uint64_t checkpoint_digest(const Checkpoint& ckpt);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> val_history;
  std::vector<double> lr_history;
};

TrainResult train(const NetworkSpec& spec, const SampleSet& train_set,
                  const SampleSet& val_set, const TrainConfig& config);

// NHWC float batch from packed 8-bit samples.
Tensor<float> batch_from_samples(const SampleSet& set, std::span<const int> indices);

Tensor<float> batch_from_image(const Image& image);

Eigen::VectorXf predict(const NetworkSpec& spec, const Params<float>& params,
                        const Image& image);

// Class probabilities for samples [begin, end), one column per sample.
Eigen::MatrixXf predict_samples(const NetworkSpec& spec, const Params<float>& params,
                                const SampleSet& set, int begin, int end,
                                int batch_size = 256);

}  // namespace signbench
