#include "signbench/xai.hpp"

#include <algorithm>
#include <cmath>

namespace signbench {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using ConstRowMajorMapD =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Single-sample im2col over a planar (CHW) tensor, channel fastest in the
// patch index to match the (out_ch, kh, kw, in_ch) weight layout. Padding
// positions stay zero.
Mat im2col_1(const Tensor<double>& in, int h, int w, int c, const ConvSpec& l, int oh,
             int ow) {
  const int k = l.kh * l.kw * c;
  Mat cols = Mat::Zero(k, static_cast<Eigen::Index>(oh) * ow);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < l.kh; ++ky) {
        const int y = oy * l.stride - l.pad + ky;
        if (y < 0 || y >= h) continue;
        for (int kx = 0; kx < l.kw; ++kx) {
          const int x = ox * l.stride - l.pad + kx;
          if (x < 0 || x >= w) continue;
          for (int ci = 0; ci < c; ++ci)
            cols((ky * l.kw + kx) * c + ci, col) =
                in.values[(static_cast<Eigen::Index>(ci) * h + y) * w + x];
        }
      }
    }
  return cols;
}

void col2im_1(const Mat& cols, int h, int w, int c, const ConvSpec& l, int oh, int ow,
              Tensor<double>& out) {
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
      for (int ky = 0; ky < l.kh; ++ky) {
        const int y = oy * l.stride - l.pad + ky;
        if (y < 0 || y >= h) continue;
        for (int kx = 0; kx < l.kw; ++kx) {
          const int x = ox * l.stride - l.pad + kx;
          if (x < 0 || x >= w) continue;
          for (int ci = 0; ci < c; ++ci)
            out.values[(static_cast<Eigen::Index>(ci) * h + y) * w + x] +=
                cols((ky * l.kw + kx) * c + ci, col);
        }
      }
    }
}

constexpr double kDenTiny = 1e-12;

}  // namespace

RelevanceMap lrp_explain(const NetworkSpec& spec, const Params<float>& params,
                         const Image& image, int target_class,
                         const LrpConfig& config) {
  if (image.width != spec.input_w || image.height != spec.input_h ||
      image.channels() != spec.input_c)
    throw TensorShapeMismatch("lrp: image does not match network input");
  if (target_class < 0 || target_class >= spec.num_classes)
    throw TensorShapeMismatch("lrp: target class out of range");

  const auto shapes = spec.stage_shapes();
  const Params<double> dparams = cast_params<double>(params);

  Tensor<double> input = Tensor<double>::zeros({1, spec.input_h, spec.input_w, spec.input_c});
  {
    double* dst = input.values.data();
    for (int c = 0; c < image.channels(); ++c)
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) *dst++ = image.at(c, y, x);
  }

  ForwardTrace<double> trace;
  const Tensor<double> logits = forward(spec, dparams, input, &trace);
  const double target_logit = logits.values[target_class];

  // Index of the first convolution: that one gets the box rule.
  int first_conv = -1;
  for (std::size_t li = 0; li < spec.layers.size(); ++li)
    if (std::holds_alternative<ConvSpec>(spec.layers[li])) {
      first_conv = static_cast<int>(li);
      break;
    }

  Tensor<double> rel = Tensor<double>::zeros(logits.shape);
  rel.values[target_class] = target_logit;

  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const StageShape& si = shapes[static_cast<std::size_t>(li)];
    const StageShape& so = shapes[static_cast<std::size_t>(li) + 1];
    const Tensor<double>& in = trace.stage[static_cast<std::size_t>(li)];
    const Tensor<double>& out = trace.stage[static_cast<std::size_t>(li) + 1];
    Tensor<double> next;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, DenseSpec>) {
            // epsilon rule: R_i = x_i * sum_j w_ji * R_j / (z_j + eps*sign(z_j))
            const double sd = std::sqrt(
                (in.values.array() - in.values.mean()).square().mean());
            const double eps = std::max(config.eps_floor, config.eps_factor * sd);
            ConstRowMajorMapD wmat(dparams[static_cast<std::size_t>(li)].weight.values.data(),
                                   l.out, l.in);
            Vec scaled(l.out);
            for (int j = 0; j < l.out; ++j) {
              const double z = out.values[j];
              scaled[j] = rel.values[j] / (z + (z >= 0.0 ? eps : -eps));
            }
            next = Tensor<double>::zeros(in.shape);
            next.values = in.values.cwiseProduct(wmat.transpose() * scaled);
          } else if constexpr (std::is_same_v<T, ConvSpec>) {
            const Mat cols = im2col_1(in, si.h, si.w, si.c, l, so.h, so.w);
            ConstRowMajorMapD wmat(dparams[static_cast<std::size_t>(li)].weight.values.data(),
                                   l.out_ch, l.kh * l.kw * l.in_ch);
            const Vec& bias = dparams[static_cast<std::size_t>(li)].bias.values;
            const Eigen::Index pixels = static_cast<Eigen::Index>(so.h) * so.w;
            Mat rcols = Mat::Zero(cols.rows(), pixels);
            Vec contrib(cols.rows());
            const bool box = (static_cast<int>(li) == first_conv);
            Mat valid;
            if (box) {
              // padded positions are pinned at zero: their box bounds
              // degenerate to [0, 0] and must not attract relevance
              Tensor<double> ones = Tensor<double>::zeros(in.shape);
              ones.values.setOnes();
              valid = im2col_1(ones, si.h, si.w, si.c, l, so.h, so.w);
            }
            for (Eigen::Index p = 0; p < pixels; ++p) {
              for (int o = 0; o < l.out_ch; ++o) {
                const double r = rel.values[static_cast<Eigen::Index>(o) * pixels + p];
                if (r == 0.0) continue;
                if (box) {
                  // z^B rule with pixel bounds [lo, hi]
                  contrib = wmat.row(o).transpose().cwiseProduct(cols.col(p)) -
                            (config.box_lo * wmat.row(o).transpose().cwiseMax(0.0) +
                             config.box_hi * wmat.row(o).transpose().cwiseMin(0.0))
                                .cwiseProduct(valid.col(p));
                  const double denom = contrib.sum() + bias[o];
                  if (std::abs(denom) < kDenTiny) continue;
                  rcols.col(p) += contrib * (r / denom);
                } else {
                  contrib = wmat.row(o).transpose().cwiseProduct(cols.col(p));
                  if (config.alpha != 0.0) {
                    const Vec pos = contrib.cwiseMax(0.0);
                    const double zp = pos.sum() + std::max(bias[o], 0.0);
                    if (zp > kDenTiny) rcols.col(p) += pos * (config.alpha * r / zp);
                  }
                  if (config.beta != 0.0) {
                    const Vec neg = contrib.cwiseMin(0.0);
                    const double zn = neg.sum() + std::min(bias[o], 0.0);
                    if (zn < -kDenTiny) rcols.col(p) -= neg * (config.beta * r / zn);
                  }
                }
              }
            }
            next = Tensor<double>::zeros(in.shape);
            col2im_1(rcols, si.h, si.w, si.c, l, so.h, so.w, next);
          } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
            next = Tensor<double>::zeros(in.shape);
            const auto& winners = trace.pool_winner[static_cast<std::size_t>(li)];
            for (std::size_t oi = 0; oi < winners.size(); ++oi)
              next.values[winners[oi]] += rel.values[static_cast<Eigen::Index>(oi)];
          } else {
            // relu and flatten pass relevance through unchanged
            next = rel;
            next.shape = in.shape;
          }
        },
        spec.layers[static_cast<std::size_t>(li)]);
    rel = std::move(next);
  }

  RelevanceMap map;
  map.target_class = target_class;
  map.target_logit = target_logit;
  map.source_count = 1;
  map.values = Eigen::ArrayXXf::Zero(spec.input_h, spec.input_w);
  const Eigen::Index hw = static_cast<Eigen::Index>(spec.input_h) * spec.input_w;
  for (int y = 0; y < spec.input_h; ++y)
    for (int x = 0; x < spec.input_w; ++x) {
      double sum = 0.0;
      for (int c = 0; c < spec.input_c; ++c)
        sum += rel.values[c * hw + static_cast<Eigen::Index>(y) * spec.input_w + x];
      map.values(y, x) = static_cast<float>(sum);
    }
  return map;
}

RelevanceMap lrp_explain(const Checkpoint& ckpt, const NetworkSpec& spec,
                         const Image& image, int target_class,
                         const LrpConfig& config) {
  if (ckpt.spec_digest != spec.digest())
    throw CheckpointError("checkpoint was trained with a different network spec");
  return lrp_explain(spec, ckpt.params, image, target_class, config);
}

namespace {

Image image_from_sample(const SampleSet& set, int index) {
  constexpr int side = SampleSet::kSide;
  Image img = make_image(side, side, 3);
  const std::uint8_t* px =
      set.pixels.data() + static_cast<std::size_t>(index) * SampleSet::kPixelsPerSample;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        img.at(c, y, x) = static_cast<float>(px[(c * side + y) * side + x]) / 255.0f;
  return img;
}

}  // namespace

std::map<int, RelevanceMap> average_class_explanations(const NetworkSpec& spec,
                                                       const Params<float>& params,
                                                       const SampleSet& samples,
                                                       const LrpConfig& config) {
  std::map<int, RelevanceMap> sums;
  const Eigen::MatrixXf probs = predict_samples(spec, params, samples, 0, samples.count);
  for (int i = 0; i < samples.count; ++i) {
    int arg = 0;
    float best = probs(0, i);
    for (int k = 1; k < spec.num_classes; ++k)
      if (probs(k, i) > best) {
        best = probs(k, i);
        arg = k;
      }
    const int truth = samples.labels[static_cast<std::size_t>(i)];
    if (arg != truth) continue;
    const RelevanceMap map =
        lrp_explain(spec, params, image_from_sample(samples, i), truth, config);
    auto it = sums.find(truth);
    if (it == sums.end()) {
      sums.emplace(truth, map);
    } else {
      it->second.values += map.values;
      it->second.target_logit += map.target_logit;
      it->second.source_count += 1;
    }
  }
  for (auto& [cls, map] : sums) {
    (void)cls;
    map.values /= static_cast<float>(map.source_count);
    map.target_logit /= map.source_count;
  }
  return sums;
}

namespace {

// Piecewise-linear stops chosen so color(-t) equals color(t) with the red
// and blue channels swapped; the midpoint is its own mirror.
struct Stop {
  float t, r, g, b;
};
constexpr Stop kStops[] = {
    {-1.0f, 0.08f, 0.12f, 0.90f},
    {-0.5f, 0.10f, 0.85f, 0.95f},
    {0.0f, 0.15f, 0.70f, 0.15f},
    {0.5f, 0.95f, 0.85f, 0.10f},
    {1.0f, 0.90f, 0.12f, 0.08f},
};

Eigen::Vector3f colormap(float t) {
  t = std::clamp(t, -1.0f, 1.0f);
  for (std::size_t i = 0; i + 1 < std::size(kStops); ++i) {
    if (t <= kStops[i + 1].t) {
      const float u = (t - kStops[i].t) / (kStops[i + 1].t - kStops[i].t);
      return {kStops[i].r + u * (kStops[i + 1].r - kStops[i].r),
              kStops[i].g + u * (kStops[i + 1].g - kStops[i].g),
              kStops[i].b + u * (kStops[i + 1].b - kStops[i].b)};
    }
  }
  return {kStops[4].r, kStops[4].g, kStops[4].b};
}

}  // namespace

Image render_heatmap(const RelevanceMap& map, const Image* background) {
  const int h = static_cast<int>(map.values.rows());
  const int w = static_cast<int>(map.values.cols());
  const float peak = map.values.abs().maxCoeff();
  Image out = make_image(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float t = (peak > 0.0f) ? map.values(y, x) / peak : 0.0f;
      const Eigen::Vector3f color = colormap(t);
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = color[c];
    }
  if (background) {
    if (background->width != w || background->height != h ||
        background->channels() != 3)
      throw std::invalid_argument("heatmap background must match the map size");
    for (int c = 0; c < 3; ++c) out.ch[c] = 0.5f * out.ch[c] + 0.5f * background->ch[c];
  }
  return out;
}

}  // namespace signbench
