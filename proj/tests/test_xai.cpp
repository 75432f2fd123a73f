#include "signbench/xai.hpp"

#include <doctest.h>

#include <cmath>

using namespace signbench;

namespace {

Image tiny_image(int side, std::initializer_list<float> values) {
  Image img = make_image(side, side, 1);
  auto it = values.begin();
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) img.at(0, y, x) = *it++;
  return img;
}

}  // namespace

TEST_SUITE_BEGIN("xai");

TEST_CASE("epsilon rule on a single dense layer distributes x*w") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 3;
  spec.layers = {FlattenSpec{}, DenseSpec{4, 3}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({3, 4});
  params[1].bias = Tensor<float>::zeros({3});
  // positive weights, positive input
  const float w[3][4] = {{0.5f, 1.0f, 0.25f, 0.75f},
                         {0.1f, 0.2f, 0.3f, 0.4f},
                         {1.0f, 1.0f, 1.0f, 1.0f}};
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 4; ++i) params[1].weight.values[k * 4 + i] = w[k][i];

  const Image img = tiny_image(2, {0.2f, 0.4f, 0.6f, 0.8f});
  LrpConfig config;
  config.eps_factor = 0.0;
  config.eps_floor = 1e-9;

  const RelevanceMap map = lrp_explain(spec, params, img, 0, config);
  const float x[4] = {0.2f, 0.4f, 0.6f, 0.8f};
  double logit = 0.0;
  for (int i = 0; i < 4; ++i) logit += x[i] * w[0][i];
  CHECK(map.target_logit == doctest::Approx(logit).epsilon(1e-6));
  // relevance proportional to x_i * w_i, summing to the logit
  int i = 0;
  for (int y = 0; y < 2; ++y)
    for (int xpix = 0; xpix < 2; ++xpix, ++i)
      CHECK(map.values(y, xpix) == doctest::Approx(x[i] * w[0][i]).epsilon(1e-5));
  CHECK(map.total() == doctest::Approx(logit).epsilon(1e-6));
}

TEST_CASE("box rule on all-zero input matches brute-force bound terms") {
  // 2x2 input fully covered by one unpadded kernel: the box numerators are
  // -hi * min(w, 0) when x = 0, evaluated by hand below.
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 1;
  spec.layers = {ConvSpec{2, 2, 1, 1, 2, 0}, FlattenSpec{}};
  Params<float> params(spec.layers.size());
  params[0].weight = Tensor<float>::zeros({1, 2, 2, 1});
  const float w[4] = {-0.5f, 0.2f, -0.3f, 0.1f};
  for (int i = 0; i < 4; ++i) params[0].weight.values[i] = w[i];
  params[0].bias = Tensor<float>::zeros({1});
  params[0].bias.values[0] = 0.01f;  // small bias so the output is nonzero

  const Image img = tiny_image(2, {0.0f, 0.0f, 0.0f, 0.0f});
  const RelevanceMap map = lrp_explain(spec, params, img, 0, LrpConfig{});

  const double logit = 0.01;
  CHECK(map.target_logit == doctest::Approx(logit).epsilon(1e-6));
  double numer[4], denom = 0.01;
  for (int i = 0; i < 4; ++i) {
    numer[i] = -1.0 * std::min(0.0, static_cast<double>(w[i]));  // hi = 1, lo = 0
    denom += numer[i];
  }
  int i = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x, ++i)
      CHECK(map.values(y, x) == doctest::Approx(logit * numer[i] / denom).epsilon(1e-5));
  // bias absorbs its share; the rest reaches the pixels
  CHECK(map.total() == doctest::Approx(logit * (denom - 0.01) / denom).epsilon(1e-5));
  CHECK(std::abs(map.total() - logit) < 0.02 * std::abs(logit) + 1e-6);
}

TEST_CASE("zero logit on a zero-bias network yields a zero map") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 2;
  spec.layers = {FlattenSpec{}, DenseSpec{4, 2}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({2, 4});
  params[1].bias = Tensor<float>::zeros({2});
  for (int i = 0; i < 4; ++i) params[1].weight.values[4 + i] = 0.3f;  // class 1 only

  const Image img = tiny_image(2, {0.5f, 0.5f, 0.5f, 0.5f});
  const RelevanceMap map = lrp_explain(spec, params, img, 0, LrpConfig{});
  CHECK(map.target_logit == 0.0);
  CHECK(map.values.abs().maxCoeff() == 0.0f);
}

TEST_CASE("relevance is conserved end to end on a zero-bias toy net") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 6;
  spec.input_c = 1;
  spec.num_classes = 4;
  spec.layers = {ConvSpec{3, 3, 1, 2, 1, 1}, ReluSpec{}, MaxPoolSpec{},
                 ConvSpec{3, 3, 2, 3, 1, 1}, ReluSpec{}, FlattenSpec{},
                 DenseSpec{3 * 3 * 3, 4}};
  auto params = init_params<float>(spec, 31);
  for (auto& layer : params)
    if (layer.has_params()) layer.bias.values.setZero();

  Image img = make_image(6, 6, 1);
  CounterRng rng(7);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x)
      img.at(0, y, x) = static_cast<float>(rng.uniform(0.05, 1.0));

  LrpConfig config;
  config.eps_factor = 0.0;
  config.eps_floor = 1e-12;

  // pick the argmax class so the target logit is positive and well away
  // from zero
  const auto probs = predict(spec, params, img);
  int target = 0;
  for (int k = 1; k < 4; ++k)
    if (probs[k] > probs[target]) target = k;

  const RelevanceMap map = lrp_explain(spec, params, img, target, config);
  REQUIRE(std::abs(map.target_logit) > 1e-3);
  CHECK(std::abs(map.total() - map.target_logit) <
        1e-5 * std::abs(map.target_logit));
}

TEST_CASE("alpha1-beta0 keeps relevance non-negative through conv stacks") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 4;
  spec.input_c = 1;
  spec.num_classes = 3;
  spec.layers = {ConvSpec{3, 3, 1, 2, 1, 0}, ReluSpec{}, ConvSpec{2, 2, 2, 3, 2, 0},
                 FlattenSpec{}};
  auto params = init_params<float>(spec, 77);
  for (auto& layer : params)
    if (layer.has_params()) layer.bias.values.setZero();

  Image img = make_image(4, 4, 1);
  CounterRng rng(13);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(0, y, x) = static_cast<float>(rng.uniform(0, 1));

  const auto probs = predict(spec, params, img);
  int target = 0;
  for (int k = 1; k < 3; ++k)
    if (probs[k] > probs[target]) target = k;
  const RelevanceMap map = lrp_explain(spec, params, img, target, LrpConfig{});
  if (map.target_logit > 0) CHECK(map.values.minCoeff() >= -1e-6f);
}

TEST_CASE("class averages match a two-pass recomputation") {
  // Classifier whose prediction is planted by a single bright pixel.
  NetworkSpec spec;
  spec.layers = {FlattenSpec{}, DenseSpec{64 * 64 * 3, 24}};
  Params<float> params(spec.layers.size());
  params[1].weight = Tensor<float>::zeros({24, 64 * 64 * 3});
  params[1].bias = Tensor<float>::zeros({24});
  for (int k = 0; k < 24; ++k)
    params[1].weight.values[static_cast<Eigen::Index>(k) * 64 * 64 * 3 + k] = 1.0f;

  SampleSet set;
  set.count = 6;
  set.pixels.assign(static_cast<std::size_t>(set.count) * SampleSet::kPixelsPerSample, 10);
  set.labels = {2, 2, 2, 5, 5, 7};
  set.levels.assign(6, 1);
  const std::vector<int> preds = {2, 2, 2, 5, 4, 7};  // one class-5 miss
  for (std::size_t i = 0; i < preds.size(); ++i)
    set.pixels[i * SampleSet::kPixelsPerSample + static_cast<std::size_t>(preds[i])] = 255;

  const auto maps = average_class_explanations(spec, params, set);
  REQUIRE(maps.count(2) == 1);
  REQUIRE(maps.count(5) == 1);
  REQUIRE(maps.count(7) == 1);
  CHECK(maps.count(4) == 0);  // wrong predictions contribute nothing
  CHECK(maps.at(2).source_count == 3);
  CHECK(maps.at(5).source_count == 1);
  CHECK(maps.at(7).source_count == 1);

  // single correct image: the average is that image's own map
  {
    Image img = make_image(64, 64, 3);
    const std::uint8_t* px = set.pixels.data() + 5 * SampleSet::kPixelsPerSample;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
          img.at(c, y, x) = static_cast<float>(px[(c * 64 + y) * 64 + x]) / 255.0f;
    const auto solo = lrp_explain(spec, params, img, 7, LrpConfig{});
    CHECK((maps.at(7).values - solo.values).abs().maxCoeff() < 1e-6f);
  }

  // two-pass mean for class 2
  {
    Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(64, 64);
    for (int i = 0; i < 3; ++i) {
      Image img = make_image(64, 64, 3);
      const std::uint8_t* px =
          set.pixels.data() + static_cast<std::size_t>(i) * SampleSet::kPixelsPerSample;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 64; ++y)
          for (int x = 0; x < 64; ++x)
            img.at(c, y, x) = static_cast<float>(px[(c * 64 + y) * 64 + x]) / 255.0f;
      sum += lrp_explain(spec, params, img, 2, LrpConfig{}).values.cast<double>();
    }
    const Eigen::ArrayXXf two_pass = (sum / 3.0).cast<float>();
    CHECK((maps.at(2).values - two_pass).abs().maxCoeff() < 1e-6f);
  }
}

TEST_CASE("heatmap rendering: mid color, symmetry, extremes, scale invariance") {
  RelevanceMap map;
  map.values = Eigen::ArrayXXf::Zero(8, 8);

  const Image mid = render_heatmap(map);
  for (int c = 0; c < 3; ++c)
    CHECK(mid.ch[c].maxCoeff() == mid.ch[c].minCoeff());  // uniform
  CHECK(mid.at(1, 0, 0) > mid.at(0, 0, 0));               // greenish midpoint

  map.values(2, 3) = 1.0f;
  map.values(5, 6) = -1.0f;
  const Image both = render_heatmap(map);
  // negating the map swaps the red and blue ends exactly
  RelevanceMap neg = map;
  neg.values = -map.values;
  const Image swapped = render_heatmap(neg);
  CHECK((both.ch[0] - swapped.ch[2]).abs().maxCoeff() < 1e-6f);
  CHECK((both.ch[2] - swapped.ch[0]).abs().maxCoeff() < 1e-6f);
  CHECK((both.ch[1] - swapped.ch[1]).abs().maxCoeff() < 1e-6f);

  // single positive pixel: warm extreme there, mid elsewhere
  RelevanceMap solo;
  solo.values = Eigen::ArrayXXf::Zero(4, 4);
  solo.values(1, 1) = 0.7f;
  const Image warm = render_heatmap(solo);
  CHECK(warm.at(0, 1, 1) > 0.85f);
  CHECK(warm.at(2, 1, 1) < 0.15f);
  CHECK(warm.at(0, 0, 0) == doctest::Approx(mid.at(0, 0, 0)));

  // positive scaling changes nothing
  RelevanceMap scaled = solo;
  scaled.values *= 42.0f;
  CHECK(images_equal(render_heatmap(solo), render_heatmap(scaled)));

  // blending requires a matching background
  const Image bg = make_image(4, 4, 3, 0.5f);
  const Image blend = render_heatmap(solo, &bg);
  CHECK(blend.at(0, 1, 1) == doctest::Approx(0.5f * warm.at(0, 1, 1) + 0.25f));
}

TEST_CASE("checkpoint digest mismatch is rejected") {
  NetworkSpec spec;
  spec.input_h = spec.input_w = 2;
  spec.input_c = 1;
  spec.num_classes = 2;
  spec.layers = {FlattenSpec{}, DenseSpec{4, 2}};
  Checkpoint ckpt;
  ckpt.spec_digest = 0xdeadbeef;  // wrong on purpose
  ckpt.params = init_params<float>(spec, 1);
  const Image img = tiny_image(2, {0.1f, 0.2f, 0.3f, 0.4f});
  CHECK_THROWS_AS(lrp_explain(ckpt, spec, img, 0, LrpConfig{}), CheckpointError);
}

TEST_SUITE_END();
