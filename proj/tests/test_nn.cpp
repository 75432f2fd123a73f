#include "signbench/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

using namespace signbench;

namespace {

// Central-difference reference for every parameter of a network.
template <typename LossFn>
double max_gradcheck_error(Params<double>& params, const Params<double>& analytic,
                           LossFn loss_of, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t li = 0; li < params.size(); ++li) {
    if (!params[li].has_params()) continue;
    for (auto which : {0, 1}) {
      auto& tensor = which == 0 ? params[li].weight : params[li].bias;
      const auto& grad = which == 0 ? analytic[li].weight : analytic[li].bias;
      for (Eigen::Index k = 0; k < tensor.numel(); ++k) {
        const double saved = tensor.values[k];
        tensor.values[k] = saved + h;
        const double up = loss_of(params);
        tensor.values[k] = saved - h;
        const double down = loss_of(params);
        tensor.values[k] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = grad.values[k];
        const double scale = std::max({std::abs(a), std::abs(numeric), 1e-4});
        worst = std::max(worst, std::abs(a - numeric) / scale);
      }
    }
  }
  return worst;
}

SampleSet make_separable_toy(int per_class, std::uint64_t seed) {
  SampleSet set;
  set.count = 2 * per_class;
  set.pixels.resize(static_cast<std::size_t>(set.count) * SampleSet::kPixelsPerSample);
  set.labels.resize(static_cast<std::size_t>(set.count));
  set.levels.assign(static_cast<std::size_t>(set.count), 1);
  CounterRng rng(seed);
  constexpr int side = SampleSet::kSide;
  for (int i = 0; i < set.count; ++i) {
    const int label = i % 2;
    set.labels[static_cast<std::size_t>(i)] = label;
    std::uint8_t* px =
        set.pixels.data() + static_cast<std::size_t>(i) * SampleSet::kPixelsPerSample;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const bool bright = (label == 0) ? (x < side / 2) : (x >= side / 2);
          const int base = bright ? 205 : 50;
          px[(c * side + y) * side + x] =
              static_cast<std::uint8_t>(base + rng.uniform_int(-25, 25));
        }
  }
  return set;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("registry provides validated architectures") {
  const NetworkSpec ref = make_network("reference");
  const auto shapes = ref.stage_shapes();
  CHECK(shapes.front().h == 64);
  CHECK(shapes.back().flat);
  CHECK(shapes.back().c == 24);
  CHECK(make_network("compact").stage_shapes().back().c == 24);
  CHECK_THROWS_AS(make_network("resnet99"), NnError);
  const auto names = registered_networks();
  CHECK(std::find(names.begin(), names.end(), "reference") != names.end());
  CHECK(ref.digest() != make_network("compact").digest());
}

TEST_CASE("mismatched layer chaining is rejected") {
  NetworkSpec bad;
  bad.input_h = bad.input_w = 8;
  bad.input_c = 3;
  bad.num_classes = 4;
  bad.layers = {ConvSpec{3, 3, 5, 8, 1, 1}, FlattenSpec{}, DenseSpec{8 * 8 * 8, 4}};
  CHECK_THROWS_AS(bad.stage_shapes(), TensorShapeMismatch);
}

TEST_CASE("zero-weight dense network produces zero logits") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 3;
  spec.layers = {FlattenSpec{}, DenseSpec{4, 3}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({3, 4});
  params[1].bias = Tensor<float>::zeros({3});
  Tensor<float> batch = Tensor<float>::zeros({2, 2, 2, 1});
  batch.values.setConstant(0.7f);
  const auto logits = forward(spec, params, batch);
  CHECK(logits.values.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("relu zeroes negative activations") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 1;
  spec.input_c = 1;
  spec.num_classes = 2;
  spec.layers = {FlattenSpec{}, DenseSpec{1, 2}, ReluSpec{}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({2, 1});
  params[1].weight.values << -3.0f, 2.0f;
  params[1].bias = Tensor<float>::zeros({2});
  Tensor<float> batch = Tensor<float>::zeros({1, 1, 1, 1});
  batch.values[0] = 1.0f;
  const auto out = forward(spec, params, batch);
  CHECK(out.values[0] == 0.0f);
  CHECK(out.values[1] == 2.0f);
}

TEST_CASE("1x1 convolution matches the closed form") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 4;
  spec.input_c = 1;
  spec.num_classes = 16;
  spec.layers = {ConvSpec{1, 1, 1, 1, 1, 0}, FlattenSpec{}};
  Params<float> params(spec.layers.size());
  params[0].weight = Tensor<float>::zeros({1, 1, 1, 1});
  params[0].weight.values[0] = 2.0f;
  params[0].bias = Tensor<float>::zeros({1});
  Tensor<float> batch = Tensor<float>::zeros({1, 4, 4, 1});
  batch.values.setConstant(0.5f);
  const auto out = forward(spec, params, batch);
  CHECK(out.numel() == 16);
  for (Eigen::Index i = 0; i < out.numel(); ++i)
    CHECK(out.values[i] == doctest::Approx(1.0f));
}

TEST_CASE("uniform logits give ln(24) cross-entropy") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 24;
  spec.layers = {FlattenSpec{}, DenseSpec{4, 24}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({24, 4});
  params[1].bias = Tensor<float>::zeros({24});
  Tensor<float> batch = Tensor<float>::zeros({3, 2, 2, 1});
  batch.values.setConstant(0.5f);
  Params<float> grads;
  const std::vector<int> labels = {0, 7, 23};
  const float loss = loss_and_grad<float>(spec, params, batch, labels, grads);
  CHECK(loss == doctest::Approx(std::log(24.0f)).epsilon(1e-6));
}

TEST_CASE("duplicating a sample leaves the mean loss unchanged") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 2;
  spec.num_classes = 5;
  spec.layers = {FlattenSpec{}, DenseSpec{8, 5}};
  auto params = init_params<float>(spec, 3);
  Tensor<float> one = Tensor<float>::zeros({1, 2, 2, 2});
  CounterRng rng(4);
  for (Eigen::Index i = 0; i < one.numel(); ++i)
    one.values[i] = static_cast<float>(rng.next_double());
  // duplicate respecting the feature-major plane order
  Tensor<float> two = Tensor<float>::zeros({2, 2, 2, 2});
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < 2; ++n)
      two.values.segment((c * 2 + n) * 4, 4) = one.values.segment(c * 4, 4);
  Params<float> grads;
  const std::vector<int> l1 = {2}, l2 = {2, 2};
  const float a = loss_and_grad<float>(spec, params, one, l1, grads);
  const float b = loss_and_grad<float>(spec, params, two, l2, grads);
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central differences for all layer kinds") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 6;
  spec.input_c = 2;
  spec.num_classes = 5;
  spec.layers = {ConvSpec{3, 3, 2, 3, 1, 1}, ReluSpec{}, MaxPoolSpec{}, FlattenSpec{},
                 DenseSpec{3 * 3 * 3, 5}};
  auto params = init_params<double>(spec, 11);
  Tensor<double> batch = Tensor<double>::zeros({2, 6, 6, 2});
  CounterRng rng(12);
  for (Eigen::Index i = 0; i < batch.numel(); ++i)
    batch.values[i] = rng.uniform(0.0, 1.0);
  const std::vector<int> labels = {1, 4};

  Params<double> analytic;
  loss_and_grad<double>(spec, params, batch, labels, analytic);

  Params<double> probe = params;
  const auto loss_of = [&](const Params<double>& p) {
    Params<double> scratch;
    return loss_and_grad<double>(spec, p, batch, labels, scratch);
  };
  CHECK(max_gradcheck_error(probe, analytic, loss_of) < 1e-4);
}

TEST_CASE("gradients flow through strided and unpadded convolutions") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 7;
  spec.input_c = 1;
  spec.num_classes = 3;
  spec.layers = {ConvSpec{3, 3, 1, 2, 2, 0}, ReluSpec{}, FlattenSpec{},
                 DenseSpec{3 * 3 * 2, 3}};
  auto params = init_params<double>(spec, 21);
  Tensor<double> batch = Tensor<double>::zeros({1, 7, 7, 1});
  CounterRng rng(22);
  for (Eigen::Index i = 0; i < batch.numel(); ++i)
    batch.values[i] = rng.uniform(-1.0, 1.0);
  const std::vector<int> labels = {2};
  Params<double> analytic;
  loss_and_grad<double>(spec, params, batch, labels, analytic);
  Params<double> probe = params;
  const auto loss_of = [&](const Params<double>& p) {
    Params<double> scratch;
    return loss_and_grad<double>(spec, p, batch, labels, scratch);
  };
  CHECK(max_gradcheck_error(probe, analytic, loss_of) < 1e-4);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  Params<double> params(1);
  params[0].weight = Tensor<double>::zeros({2, 2});
  params[0].weight.values.setConstant(1.5);
  params[0].bias = Tensor<double>::zeros({2});
  auto state = make_adam_state(params);
  const auto grads = zeros_like(params);
  adam_step(state, params, grads, 0.01);
  CHECK(params[0].weight.values.isApproxToConstant(1.5));
}

TEST_CASE("first adam step matches the hand-evaluated update") {
  Params<double> params(1);
  params[0].weight = Tensor<double>::zeros({1, 1});
  params[0].weight.values[0] = 1.0;
  params[0].bias = Tensor<double>::zeros({1});
  auto state = make_adam_state(params);
  Params<double> grads = zeros_like(params);
  grads[0].weight.values[0] = 1.0;
  adam_step(state, params, grads, 0.001);
  // m_hat = 1, v_hat = 1: theta = 1 - 0.001 * 1 / (1 + 1e-8)
  CHECK(params[0].weight.values[0] ==
        doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("first adam step size is invariant to gradient scale") {
  const auto step_with = [](double g) {
    Params<double> params(1);
    params[0].weight = Tensor<double>::zeros({1, 1});
    params[0].weight.values[0] = 1.0;
    params[0].bias = Tensor<double>::zeros({1});
    auto state = make_adam_state(params);
    Params<double> grads = zeros_like(params);
    grads[0].weight.values[0] = g;
    adam_step(state, params, grads, 0.001);
    return params[0].weight.values[0];
  };
  CHECK(step_with(0.003) == doctest::Approx(step_with(3.0)).epsilon(1e-6));
  CHECK(step_with(-0.2) == doctest::Approx(step_with(-200.0)).epsilon(1e-6));
}

TEST_CASE("non-finite gradients are rejected") {
  Params<float> params(1);
  params[0].weight = Tensor<float>::zeros({1, 1});
  params[0].bias = Tensor<float>::zeros({1});
  auto state = make_adam_state(params);
  Params<float> grads = zeros_like(params);
  grads[0].weight.values[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(state, params, grads, 0.001f), NonFiniteGradient);
}

TEST_CASE("plateau rule follows the documented schedule") {
  TrainConfig config;
  config.initial_lr = 0.001;
  config.plateau_patience = 10;
  config.plateau_factor = 0.2;

  std::vector<double> decreasing;
  for (int i = 0; i < 15; ++i) decreasing.push_back(1.0 - 0.05 * i);
  CHECK(plateau_update(decreasing, config, 0.001) == doctest::Approx(0.001));

  const std::vector<double> flat11(11, 0.7);
  CHECK(plateau_update(flat11, config, 0.001) == doctest::Approx(0.0002));

  std::vector<double> two_windows = {1.0};
  two_windows.insert(two_windows.end(), 10, 1.0);  // first stall: one reduction
  two_windows.push_back(0.9);                      // improvement in between
  two_windows.insert(two_windows.end(), 10, 0.9);  // second stall: second reduction
  CHECK(plateau_update(two_windows, config, 0.001) == doctest::Approx(0.00004));

  // never increases, and k reductions give factor^k
  std::vector<double> long_flat(32, 0.5);
  const double lr = plateau_update(long_flat, config, 0.001);
  CHECK(lr == doctest::Approx(0.001 * 0.2 * 0.2 * 0.2));
}

TEST_CASE("training separates a toy problem and is seed-deterministic") {
  NetworkSpec spec;
  spec.num_classes = 2;
  spec.layers = {ConvSpec{3, 3, 3, 4, 1, 1}, ReluSpec{}, MaxPoolSpec{}, MaxPoolSpec{},
                 MaxPoolSpec{}, FlattenSpec{}, DenseSpec{8 * 8 * 4, 2}};

  const SampleSet train_set = make_separable_toy(20, 1);
  const SampleSet val_set = make_separable_toy(6, 2);

  TrainConfig config;
  config.epochs = 30;
  config.batch_size = 8;
  config.seed = 5;

  const TrainResult result = train(spec, train_set, val_set, config);
  CHECK(result.checkpoint.epoch >= 0);
  CHECK(result.val_history.size() == 30);

  const auto probs =
      predict_samples(spec, result.checkpoint.params, train_set, 0, train_set.count);
  int correct = 0;
  for (int i = 0; i < train_set.count; ++i) {
    const int arg = probs(0, i) >= probs(1, i) ? 0 : 1;
    if (arg == train_set.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  CHECK(static_cast<double>(correct) / train_set.count >= 0.95);

  const TrainResult again = train(spec, train_set, val_set, config);
  CHECK(checkpoint_digest(result.checkpoint) == checkpoint_digest(again.checkpoint));

  TrainConfig other = config;
  other.seed = 6;
  const TrainResult different = train(spec, train_set, val_set, other);
  CHECK(checkpoint_digest(result.checkpoint) != checkpoint_digest(different.checkpoint));
}

TEST_CASE("empty selections are rejected up front") {
  NetworkSpec spec;
  spec.num_classes = 2;
  spec.layers = {FlattenSpec{}, DenseSpec{64 * 64 * 3, 2}};
  const SampleSet train_set = make_separable_toy(4, 1);
  SampleSet empty;
  CHECK_THROWS_AS(train(spec, train_set, empty, TrainConfig{}), EmptySplit);
  CHECK_THROWS_AS(train(spec, empty, train_set, TrainConfig{}), EmptySplit);
}

TEST_CASE("prediction is a probability simplex point") {
  NetworkSpec spec;
  spec.num_classes = 24;
  spec.layers = {FlattenSpec{}, DenseSpec{64 * 64 * 3, 24}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({24, 64 * 64 * 3});
  params[1].bias = Tensor<float>::zeros({24});

  const Image img = make_image(64, 64, 3, 0.3f);
  const Eigen::VectorXf probs = predict(spec, params, img);
  CHECK(probs.size() == 24);
  CHECK(probs.minCoeff() >= 0.0f);
  CHECK(std::abs(probs.sum() - 1.0f) < 1e-6f);
  // zero parameters: exactly uniform
  for (int k = 0; k < 24; ++k) CHECK(probs[k] == doctest::Approx(1.0f / 24).epsilon(1e-5));
}

TEST_CASE("softmax is invariant to constant logit shifts") {
  Eigen::MatrixXf logits(4, 2);
  logits << 1.0f, -2.0f, 0.5f, 0.0f, -1.0f, 3.0f, 2.0f, 1.0f;
  const Eigen::MatrixXf base = softmax_columns<float>(logits);
  const Eigen::MatrixXf shifted = softmax_columns<float>(
      (logits.array() + 7.5f).matrix());
  CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("checkpoints round-trip through disk") {
  NetworkSpec spec;
  spec.num_classes = 2;
  spec.layers = {ConvSpec{3, 3, 3, 4, 1, 1}, ReluSpec{}, MaxPoolSpec{}, MaxPoolSpec{},
                 MaxPoolSpec{}, FlattenSpec{}, DenseSpec{8 * 8 * 4, 2}};
  Checkpoint ckpt;
  ckpt.spec_digest = spec.digest();
  ckpt.params = init_params<float>(spec, 9);
  ckpt.epoch = 17;
  ckpt.val_loss = 0.125;

  const auto path = std::filesystem::temp_directory_path() / "sb_nn_ckpt" / "test.ckpt";
  std::filesystem::remove_all(path.parent_path());
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.spec_digest == ckpt.spec_digest);
  CHECK(back.epoch == 17);
  CHECK(back.val_loss == 0.125);
  CHECK(checkpoint_digest(back) == checkpoint_digest(ckpt));
  REQUIRE(back.params.size() == ckpt.params.size());
  CHECK(back.params[0].weight.values == ckpt.params[0].weight.values);
  std::filesystem::remove_all(path.parent_path());
}

TEST_SUITE_END();
