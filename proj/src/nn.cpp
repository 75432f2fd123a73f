#include "signbench/nn.hpp"

#include "signbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace signbench {

template <typename S>
Tensor<S> Tensor<S>::zeros(std::vector<int> shape) {
  Tensor<S> t;
  t.shape = std::move(shape);
  Eigen::Index n = 1;
  for (int d : t.shape) n *= d;
  t.values = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(n);
  return t;
}

std::vector<StageShape> NetworkSpec::stage_shapes() const {
  std::vector<StageShape> out;
  out.push_back({input_h, input_w, input_c, false});
  for (const auto& layer : layers) {
    const StageShape& in = out.back();
    StageShape next = in;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvSpec>) {
            if (in.flat || in.c != l.in_ch)
              throw TensorShapeMismatch("conv input channels do not match");
            next.h = (in.h + 2 * l.pad - l.kh) / l.stride + 1;
            next.w = (in.w + 2 * l.pad - l.kw) / l.stride + 1;
            next.c = l.out_ch;
            if (next.h <= 0 || next.w <= 0)
              throw TensorShapeMismatch("conv output collapses to zero");
          } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
            if (in.flat || in.h % 2 != 0 || in.w % 2 != 0)
              throw TensorShapeMismatch("maxpool needs even spatial dims");
            next.h = in.h / 2;
            next.w = in.w / 2;
          } else if constexpr (std::is_same_v<T, FlattenSpec>) {
            if (in.flat) throw TensorShapeMismatch("flatten applied twice");
            next = StageShape{0, 0, in.h * in.w * in.c, true};
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            if (!in.flat || in.c != l.in)
              throw TensorShapeMismatch("dense input size does not match");
            next = StageShape{0, 0, l.out, true};
          }
          // relu keeps the shape
        },
        layer);
    out.push_back(next);
  }
  if (!out.back().flat || out.back().c != num_classes)
    throw TensorShapeMismatch("network does not end in num_classes logits");
  return out;
}

std::uint64_t NetworkSpec::digest() const {
  std::ostringstream os;
  os << input_h << "x" << input_w << "x" << input_c << ">" << num_classes << ":";
  for (const auto& layer : layers)
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvSpec>)
            os << "conv(" << l.kh << "," << l.kw << "," << l.in_ch << "," << l.out_ch
               << "," << l.stride << "," << l.pad << ");";
          else if constexpr (std::is_same_v<T, ReluSpec>)
            os << "relu;";
          else if constexpr (std::is_same_v<T, MaxPoolSpec>)
            os << "maxpool;";
          else if constexpr (std::is_same_v<T, FlattenSpec>)
            os << "flatten;";
          else
            os << "dense(" << l.in << "," << l.out << ");";
        },
        layer);
  return fnv1a(os.str());
}

namespace {

NetworkSpec reference_network() {
  NetworkSpec spec;
  spec.layers = {
      ConvSpec{3, 3, 3, 16, 1, 1},  ReluSpec{}, MaxPoolSpec{},
      ConvSpec{3, 3, 16, 32, 1, 1}, ReluSpec{}, MaxPoolSpec{},
      ConvSpec{3, 3, 32, 64, 1, 1}, ReluSpec{}, MaxPoolSpec{},
      FlattenSpec{},
      DenseSpec{8 * 8 * 64, 128},   ReluSpec{},
      DenseSpec{128, 24},
  };
  return spec;
}

NetworkSpec compact_network() {
  NetworkSpec spec;
  spec.layers = {
      ConvSpec{3, 3, 3, 8, 1, 1},  ReluSpec{}, MaxPoolSpec{},
      ConvSpec{3, 3, 8, 16, 1, 1}, ReluSpec{}, MaxPoolSpec{},
      FlattenSpec{},
      DenseSpec{16 * 16 * 16, 64}, ReluSpec{},
      DenseSpec{64, 24},
  };
  return spec;
}

std::map<std::string, NetworkSpec (*)()>& registry() {
  static std::map<std::string, NetworkSpec (*)()> reg = {
      {"reference", &reference_network},
      {"compact", &compact_network},
  };
  return reg;
}

}  // namespace

NetworkSpec make_network(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw NnError("unknown network spec: " + name);
  return it->second();
}

void register_network(const std::string& name, NetworkSpec (*factory)()) {
  registry()[name] = factory;
}

std::vector<std::string> registered_networks() {
  std::vector<std::string> names;
  for (const auto& [name, factory] : registry()) names.push_back(name);
  return names;
}

template <typename S>
Params<S> init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.stage_shapes();  // validate
  Params<S> params(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    CounterRng rng(derive_stream(mix_key(seed, i), "init"));
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvSpec>) {
            params[i].weight = Tensor<S>::zeros({l.out_ch, l.kh, l.kw, l.in_ch});
            params[i].bias = Tensor<S>::zeros({l.out_ch});
            const double limit = std::sqrt(3.0 / (l.kh * l.kw * l.in_ch));
            for (Eigen::Index k = 0; k < params[i].weight.numel(); ++k)
              params[i].weight.values[k] = static_cast<S>(rng.uniform(-limit, limit));
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            params[i].weight = Tensor<S>::zeros({l.out, l.in});
            params[i].bias = Tensor<S>::zeros({l.out});
            const double limit = std::sqrt(3.0 / l.in);
            for (Eigen::Index k = 0; k < params[i].weight.numel(); ++k)
              params[i].weight.values[k] = static_cast<S>(rng.uniform(-limit, limit));
          }
        },
        spec.layers[i]);
  }
  return params;
}

template <typename S>
Params<S> zeros_like(const Params<S>& params) {
  Params<S> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_params()) continue;
    out[i].weight = Tensor<S>::zeros(params[i].weight.shape);
    out[i].bias = Tensor<S>::zeros(params[i].bias.shape);
  }
  return out;
}

template <typename To, typename From>
Params<To> cast_params(const Params<From>& params) {
  Params<To> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_params()) continue;
    out[i].weight.shape = params[i].weight.shape;
    out[i].weight.values = params[i].weight.values.template cast<To>();
    out[i].bias.shape = params[i].bias.shape;
    out[i].bias.values = params[i].bias.values.template cast<To>();
  }
  return out;
}

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using MatMap = Eigen::Map<Mat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Mat<S>>;
template <typename S>
using RowMajorMap =
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Activations for spatial stages are stored feature-major: one (N*H*W)
// plane per channel, i.e. flat index ((c*N + n)*H + y)*W + x. Patch matrices
// then come out as (N*OH*OW) x K with the pixel dimension down the columns,
// which keeps the GEMM's vectorized dimension long and every gather a
// contiguous row run.
template <typename S>
Eigen::Index fm_index(int n_total, int h, int w, int c, int n, int y, int x) {
  return ((static_cast<Eigen::Index>(c) * n_total + n) * h + y) * w + x;
}

template <typename S>
void im2colT(const Tensor<S>& in, int n, int h, int w, int c, const ConvSpec& l, int oh,
             int ow, Mat<S>& cols) {
  const int k = l.kh * l.kw * c;
  const Eigen::Index np = static_cast<Eigen::Index>(n) * oh * ow;
  cols.setZero(np, k);
  const S* src = in.values.data();
  for (int ky = 0; ky < l.kh; ++ky)
    for (int kx = 0; kx < l.kw; ++kx)
      for (int ci = 0; ci < c; ++ci) {
        S* dst_col = cols.data() + static_cast<Eigen::Index>((ky * l.kw + kx) * c + ci) * np;
        for (int ni = 0; ni < n; ++ni)
          for (int oy = 0; oy < oh; ++oy) {
            const int y = oy * l.stride - l.pad + ky;
            if (y < 0 || y >= h) continue;
            S* dst = dst_col + (static_cast<Eigen::Index>(ni) * oh + oy) * ow;
            const S* row = src + fm_index<S>(n, h, w, ci, ni, y, 0);
            if (l.stride == 1) {
              const int ox_lo = std::max(0, l.pad - kx);
              const int ox_hi = std::min(ow, w + l.pad - kx);
              if (ox_hi > ox_lo)
                std::memcpy(dst + ox_lo, row + ox_lo + kx - l.pad,
                            sizeof(S) * static_cast<std::size_t>(ox_hi - ox_lo));
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int x = ox * l.stride - l.pad + kx;
                if (x >= 0 && x < w) dst[ox] = row[x];
              }
            }
          }
      }
}

template <typename S>
void col2imT(const Mat<S>& cols, int n, int h, int w, int c, const ConvSpec& l, int oh,
             int ow, Tensor<S>& din) {
  const Eigen::Index np = static_cast<Eigen::Index>(n) * oh * ow;
  S* dst = din.values.data();
  for (int ky = 0; ky < l.kh; ++ky)
    for (int kx = 0; kx < l.kw; ++kx)
      for (int ci = 0; ci < c; ++ci) {
        const S* src_col =
            cols.data() + static_cast<Eigen::Index>((ky * l.kw + kx) * c + ci) * np;
        for (int ni = 0; ni < n; ++ni)
          for (int oy = 0; oy < oh; ++oy) {
            const int y = oy * l.stride - l.pad + ky;
            if (y < 0 || y >= h) continue;
            const S* src = src_col + (static_cast<Eigen::Index>(ni) * oh + oy) * ow;
            S* row = dst + fm_index<S>(n, h, w, ci, ni, y, 0);
            if (l.stride == 1) {
              const int ox_lo = std::max(0, l.pad - kx);
              const int ox_hi = std::min(ow, w + l.pad - kx);
              for (int ox = ox_lo; ox < ox_hi; ++ox) row[ox + kx - l.pad] += src[ox];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int x = ox * l.stride - l.pad + kx;
                if (x >= 0 && x < w) row[x] += src[ox];
              }
            }
          }
      }
}

template <typename S>
int batch_size_of(const Tensor<S>& batch) {
  if (batch.shape.empty()) throw TensorShapeMismatch("batch tensor has no shape");
  return batch.shape[0];
}

// Activation buffers run to tens of MB; glibc would hand them out via mmap
// and give the pages back on free, so every batch would fault them in again.
// Keeping large blocks on the heap lets the allocator recycle them.
void keep_large_allocations_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

template <typename S>
Tensor<S> forward(const NetworkSpec& spec, const Params<S>& params,
                  const Tensor<S>& batch, ForwardTrace<S>* trace) {
  const auto shapes = spec.stage_shapes();
  const int n = batch_size_of(batch);
  if (batch.numel() != static_cast<Eigen::Index>(n) * shapes.front().units())
    throw TensorShapeMismatch("batch does not match network input shape");
  if (params.size() != spec.layers.size())
    throw TensorShapeMismatch("parameter count does not match layer count");

  keep_large_allocations_on_heap();
  ForwardTrace<S> local;
  ForwardTrace<S>& tr = trace ? *trace : local;
  tr.stage.clear();
  tr.stage.reserve(spec.layers.size() + 1);
  tr.pool_winner.assign(spec.layers.size(), {});
  tr.stage.push_back(batch);

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const StageShape& si = shapes[li];
    const StageShape& so = shapes[li + 1];
    const Tensor<S>& in = tr.stage.back();
    Tensor<S> out;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvSpec>) {
            out = Tensor<S>::zeros({n, so.h, so.w, so.c});
            Mat<S> cols;
            im2colT(in, n, si.h, si.w, si.c, l, so.h, so.w, cols);
            // (K x out_ch) view of the row-major (out_ch x K) weights
            ConstMatMap<S> wt(params[li].weight.values.data(), l.kh * l.kw * l.in_ch,
                              l.out_ch);
            MatMap<S> y(out.values.data(), static_cast<Eigen::Index>(n) * so.h * so.w,
                        l.out_ch);
            y.noalias() = cols * wt;
            y.rowwise() += params[li].bias.values.transpose();
          } else if constexpr (std::is_same_v<T, ReluSpec>) {
            out.shape = in.shape;
            out.values = in.values.cwiseMax(S(0));
          } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
            out = Tensor<S>::zeros({n, so.h, so.w, so.c});
            auto& winners = tr.pool_winner[li];
            winners.resize(static_cast<std::size_t>(out.numel()));
            const S* src = in.values.data();
            S* dst = out.values.data();
            Eigen::Index oi = 0;
            for (int ci = 0; ci < so.c; ++ci)
              for (int ni = 0; ni < n; ++ni)
                for (int oy = 0; oy < so.h; ++oy)
                  for (int ox = 0; ox < so.w; ++ox, ++oi) {
                    S best = std::numeric_limits<S>::lowest();
                    int best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                      for (int dx = 0; dx < 2; ++dx) {
                        const int idx = static_cast<int>(fm_index<S>(
                            n, si.h, si.w, ci, ni, 2 * oy + dy, 2 * ox + dx));
                        if (src[idx] > best) {
                          best = src[idx];
                          best_idx = idx;
                        }
                      }
                    dst[oi] = best;
                    winners[static_cast<std::size_t>(oi)] = best_idx;
                  }
          } else if constexpr (std::is_same_v<T, FlattenSpec>) {
            // feature-major to per-sample channel-major columns
            out = Tensor<S>::zeros({n, so.c});
            const Eigen::Index hw = static_cast<Eigen::Index>(si.h) * si.w;
            for (int ci = 0; ci < si.c; ++ci)
              for (int ni = 0; ni < n; ++ni)
                std::memcpy(out.values.data() + ni * so.c + ci * hw,
                            in.values.data() + (static_cast<Eigen::Index>(ci) * n + ni) * hw,
                            sizeof(S) * static_cast<std::size_t>(hw));
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            out = Tensor<S>::zeros({n, l.out});
            ConstRowMajorMap<S> wmat(params[li].weight.values.data(), l.out, l.in);
            ConstMatMap<S> x(in.values.data(), l.in, n);
            MatMap<S> y(out.values.data(), l.out, n);
            y.noalias() = wmat * x;
            y.colwise() += params[li].bias.values;
          }
        },
        spec.layers[li]);
    tr.stage.push_back(std::move(out));
  }
  return tr.stage.back();
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> softmax_columns(
    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& logits) {
  Mat<S> probs(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const S m = logits.col(j).maxCoeff();
    probs.col(j) = (logits.col(j).array() - m).exp();
    probs.col(j) /= probs.col(j).sum();
  }
  return probs;
}

template <typename S>
S loss_and_grad(const NetworkSpec& spec, const Params<S>& params, const Tensor<S>& batch,
                std::span<const int> labels, Params<S>& grads) {
  const auto shapes = spec.stage_shapes();
  const int n = batch_size_of(batch);
  if (static_cast<int>(labels.size()) != n)
    throw TensorShapeMismatch("label count does not match batch size");
  for (int label : labels)
    if (label < 0 || label >= spec.num_classes)
      throw TensorShapeMismatch("label out of range");

  ForwardTrace<S> tr;
  Tensor<S> logits = forward(spec, params, batch, &tr);

  ConstMatMap<S> lmap(logits.values.data(), spec.num_classes, n);
  Mat<S> probs = softmax_columns<S>(lmap);
  S loss = S(0);
  for (int j = 0; j < n; ++j) {
    const S m = lmap.col(j).maxCoeff();
    const S lse = m + std::log((lmap.col(j).array() - m).exp().sum());
    loss += lse - lmap(labels[static_cast<std::size_t>(j)], j);
  }
  loss /= S(n);

  if (grads.size() != params.size()) grads = zeros_like(params);
  for (auto& g : grads) {
    if (g.weight.numel() > 0) g.weight.values.setZero();
    if (g.bias.numel() > 0) g.bias.values.setZero();
  }

  // dL/dlogits of the mean cross-entropy
  Tensor<S> delta = logits;
  {
    MatMap<S> dmap(delta.values.data(), spec.num_classes, n);
    dmap = probs;
    for (int j = 0; j < n; ++j) dmap(labels[static_cast<std::size_t>(j)], j) -= S(1);
    dmap /= S(n);
  }

  for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
    const StageShape& si = shapes[static_cast<std::size_t>(li)];
    const StageShape& so = shapes[static_cast<std::size_t>(li) + 1];
    const Tensor<S>& in = tr.stage[static_cast<std::size_t>(li)];
    Tensor<S> dnext;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvSpec>) {
            const int k = l.kh * l.kw * l.in_ch;
            const Eigen::Index np = static_cast<Eigen::Index>(n) * so.h * so.w;
            Mat<S> cols;
            im2colT(in, n, si.h, si.w, si.c, l, so.h, so.w, cols);
            ConstMatMap<S> dy(delta.values.data(), np, l.out_ch);
            // (K x out_ch) gradient view writes the row-major (out_ch x K) tensor
            MatMap<S> dwt(grads[static_cast<std::size_t>(li)].weight.values.data(), k,
                          l.out_ch);
            dwt.noalias() = cols.transpose() * dy;
            grads[static_cast<std::size_t>(li)].bias.values = dy.colwise().sum().transpose();
            ConstMatMap<S> wt(params[static_cast<std::size_t>(li)].weight.values.data(), k,
                              l.out_ch);
            Mat<S> dcols = dy * wt.transpose();
            dnext = Tensor<S>::zeros({n, si.h, si.w, si.c});
            col2imT(dcols, n, si.h, si.w, si.c, l, so.h, so.w, dnext);
          } else if constexpr (std::is_same_v<T, ReluSpec>) {
            const Tensor<S>& out = tr.stage[static_cast<std::size_t>(li) + 1];
            dnext = delta;
            dnext.shape = in.shape;
            dnext.values =
                (out.values.array() > S(0)).template cast<S>() * delta.values.array();
          } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
            dnext = Tensor<S>::zeros(in.shape);
            const auto& winners = tr.pool_winner[static_cast<std::size_t>(li)];
            for (std::size_t oi = 0; oi < winners.size(); ++oi)
              dnext.values[winners[oi]] += delta.values[static_cast<Eigen::Index>(oi)];
          } else if constexpr (std::is_same_v<T, FlattenSpec>) {
            dnext = Tensor<S>::zeros(in.shape);
            const Eigen::Index hw = static_cast<Eigen::Index>(si.h) * si.w;
            for (int ci = 0; ci < si.c; ++ci)
              for (int ni = 0; ni < n; ++ni)
                std::memcpy(
                    dnext.values.data() + (static_cast<Eigen::Index>(ci) * n + ni) * hw,
                    delta.values.data() + ni * so.c + ci * hw,
                    sizeof(S) * static_cast<std::size_t>(hw));
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            ConstMatMap<S> dy(delta.values.data(), l.out, n);
            ConstMatMap<S> x(in.values.data(), l.in, n);
            RowMajorMap<S> dw(grads[static_cast<std::size_t>(li)].weight.values.data(),
                              l.out, l.in);
            dw.noalias() = dy * x.transpose();
            grads[static_cast<std::size_t>(li)].bias.values = dy.rowwise().sum();
            ConstRowMajorMap<S> wmat(params[static_cast<std::size_t>(li)].weight.values.data(),
                                     l.out, l.in);
            dnext = Tensor<S>::zeros(in.shape);
            MatMap<S> dx(dnext.values.data(), l.in, n);
            dx.noalias() = wmat.transpose() * dy;
          }
        },
        spec.layers[static_cast<std::size_t>(li)]);
    delta = std::move(dnext);
  }
  return loss;
}

template <typename S>
AdamState<S> make_adam_state(const Params<S>& params) {
  AdamState<S> state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

template <typename S>
void adam_step(AdamState<S>& state, Params<S>& params, const Params<S>& grads, S lr) {
  for (const auto& g : grads)
    if ((g.weight.numel() > 0 && !g.weight.finite()) ||
        (g.bias.numel() > 0 && !g.bias.finite()))
      throw NonFiniteGradient();

  state.step += 1;
  const S bc1 = S(1) - std::pow(state.beta1, static_cast<S>(state.step));
  const S bc2 = S(1) - std::pow(state.beta2, static_cast<S>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_params()) continue;
    const auto update = [&](auto& theta, auto& m, auto& v, const auto& g) {
      m = state.beta1 * m + (S(1) - state.beta1) * g;
      v = state.beta2 * v + (S(1) - state.beta2) * g.cwiseProduct(g);
      theta -= lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + state.epsilon).matrix());
    };
    update(params[i].weight.values, state.m[i].weight.values, state.v[i].weight.values,
           grads[i].weight.values);
    update(params[i].bias.values, state.m[i].bias.values, state.v[i].bias.values,
           grads[i].bias.values);
  }
}

double plateau_update(std::span<const double> history, const TrainConfig& config,
                      double initial_lr) {
  double lr = initial_lr;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  int cooldown = 0;
  for (const double loss : history) {
    const bool improved = loss < best - config.min_delta;
    if (improved) {
      best = loss;
      stale = 0;
    } else {
      ++stale;
    }
    if (cooldown > 0) --cooldown;
    if (!improved && stale >= config.plateau_patience && cooldown == 0) {
      lr *= config.plateau_factor;
      stale = 0;
      cooldown = config.plateau_patience;
    }
  }
  return lr;
}

Tensor<float> batch_from_samples(const SampleSet& set, std::span<const int> indices) {
  constexpr int side = SampleSet::kSide;
  constexpr int hw = side * side;
  const int n = static_cast<int>(indices.size());
  Tensor<float> batch = Tensor<float>::zeros({n, side, side, 3});
  for (int i = 0; i < n; ++i) {
    const std::uint8_t* px =
        set.pixels.data() +
        static_cast<std::size_t>(indices[static_cast<std::size_t>(i)]) *
            SampleSet::kPixelsPerSample;
    for (int c = 0; c < 3; ++c) {
      float* dst = batch.values.data() + (static_cast<Eigen::Index>(c) * n + i) * hw;
      const std::uint8_t* src = px + c * hw;
      for (int p = 0; p < hw; ++p) dst[p] = static_cast<float>(src[p]) * (1.0f / 255.0f);
    }
  }
  return batch;
}

Tensor<float> batch_from_image(const Image& image) {
  Tensor<float> batch =
      Tensor<float>::zeros({1, image.height, image.width, image.channels()});
  float* dst = batch.values.data();
  for (int c = 0; c < image.channels(); ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) *dst++ = image.at(c, y, x);
  return batch;
}

namespace {

double eval_loss(const NetworkSpec& spec, const Params<float>& params,
                 const SampleSet& set, int batch_size) {
  double total = 0.0;
  std::vector<int> idx(static_cast<std::size_t>(set.count));
  std::iota(idx.begin(), idx.end(), 0);
  for (int begin = 0; begin < set.count; begin += batch_size) {
    const int end = std::min(set.count, begin + batch_size);
    const auto batch = batch_from_samples(
        set, std::span<const int>(idx.data() + begin, static_cast<std::size_t>(end - begin)));
    Tensor<float> logits = forward(spec, params, batch);
    ConstMatMap<float> lmap(logits.values.data(), spec.num_classes, end - begin);
    for (int j = 0; j < end - begin; ++j) {
      const float m = lmap.col(j).maxCoeff();
      const float lse = m + std::log((lmap.col(j).array() - m).exp().sum());
      total += lse - lmap(set.labels[static_cast<std::size_t>(begin + j)], j);
    }
  }
  return total / set.count;
}

}  // namespace

TrainResult train(const NetworkSpec& spec, const SampleSet& train_set,
                  const SampleSet& val_set, const TrainConfig& config) {
  if (train_set.count == 0) throw EmptySplit("training");
  if (val_set.count == 0) throw EmptySplit("validation");

  Params<float> params = init_params<float>(spec, config.seed);
  AdamState<float> adam = make_adam_state(params);
  Params<float> grads = zeros_like(params);

  TrainResult result;
  result.checkpoint.spec_digest = spec.digest();
  double lr = config.initial_lr;
  double plateau_best = std::numeric_limits<double>::infinity();
  int stale = 0, cooldown = 0;

  std::vector<int> order(static_cast<std::size_t>(train_set.count));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    CounterRng shuffle_rng(
        derive_stream(mix_key(config.seed, static_cast<std::uint64_t>(epoch)), "shuffle"));
    for (int i = train_set.count - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, i))]);

    for (int begin = 0; begin < train_set.count; begin += config.batch_size) {
      const int end = std::min(train_set.count, begin + config.batch_size);
      const std::span<const int> indices(order.data() + begin,
                                         static_cast<std::size_t>(end - begin));
      const auto batch = batch_from_samples(train_set, indices);
      labels.clear();
      for (int i : indices) labels.push_back(train_set.labels[static_cast<std::size_t>(i)]);
      const float loss =
          loss_and_grad<float>(spec, params, batch, labels, grads);
      if (!std::isfinite(loss)) throw DivergedLoss();
      adam_step(adam, params, grads, static_cast<float>(lr));
    }

    const double val_loss = eval_loss(spec, params, val_set, config.batch_size);
    if (!std::isfinite(val_loss)) throw DivergedLoss();
    result.val_history.push_back(val_loss);

    if (val_loss < result.checkpoint.val_loss) {
      result.checkpoint.val_loss = val_loss;
      result.checkpoint.epoch = epoch;
      result.checkpoint.params = params;
    }

    const bool improved = val_loss < plateau_best - config.min_delta;
    if (improved) {
      plateau_best = val_loss;
      stale = 0;
    } else {
      ++stale;
    }
    if (cooldown > 0) --cooldown;
    if (!improved && stale >= config.plateau_patience && cooldown == 0) {
      lr *= config.plateau_factor;
      stale = 0;
      cooldown = config.plateau_patience;
    }
    result.lr_history.push_back(lr);
  }
  return result;
}

namespace {

template <typename T>
void write_pod(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void write_tensor(std::string& out, const Tensor<float>& t) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) write_pod<std::int32_t>(out, d);
  out.append(reinterpret_cast<const char*>(t.values.data()),
             static_cast<std::size_t>(t.numel()) * sizeof(float));
}

Tensor<float> read_tensor(const std::string& in, std::size_t& pos) {
  const auto ndim = read_pod<std::uint32_t>(in, pos);
  std::vector<int> shape(ndim);
  for (auto& d : shape) d = read_pod<std::int32_t>(in, pos);
  Tensor<float> t = Tensor<float>::zeros(shape);
  const std::size_t bytes = static_cast<std::size_t>(t.numel()) * sizeof(float);
  if (pos + bytes > in.size()) throw CheckpointError("truncated checkpoint payload");
  std::memcpy(t.values.data(), in.data() + pos, bytes);
  pos += bytes;
  return t;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = "SBCK";
  write_pod<std::uint32_t>(out, 1);  // container version
  write_pod<std::uint64_t>(out, ckpt.spec_digest);
  write_pod<std::int32_t>(out, ckpt.epoch);
  write_pod<double>(out, ckpt.val_loss);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& layer : ckpt.params) {
    write_pod<std::uint8_t>(out, layer.has_params() ? 1 : 0);
    if (layer.has_params()) {
      write_tensor(out, layer.weight);
      write_tensor(out, layer.bias);
    }
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::filesystem::create_directories(path.parent_path());
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint for write: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("short checkpoint write: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || bytes.compare(0, 4, "SBCK") != 0)
    throw CheckpointError("not a checkpoint file: " + path.string());
  std::size_t pos = 4;
  Checkpoint ckpt;
  const auto version = read_pod<std::uint32_t>(bytes, pos);
  if (version != 1) throw CheckpointError("unsupported checkpoint version");
  ckpt.spec_digest = read_pod<std::uint64_t>(bytes, pos);
  ckpt.epoch = read_pod<std::int32_t>(bytes, pos);
  ckpt.val_loss = read_pod<double>(bytes, pos);
  const auto layers = read_pod<std::uint32_t>(bytes, pos);
  ckpt.params.resize(layers);
  for (auto& layer : ckpt.params) {
    if (read_pod<std::uint8_t>(bytes, pos)) {
      layer.weight = read_tensor(bytes, pos);
      layer.bias = read_tensor(bytes, pos);
    }
  }
  return ckpt;
}

std::uint64_t checkpoint_digest(const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  return fnv1a_bytes(bytes.data(), bytes.size());
}

Eigen::VectorXf predict(const NetworkSpec& spec, const Params<float>& params,
                        const Image& image) {
  if (image.width != spec.input_w || image.height != spec.input_h ||
      image.channels() != spec.input_c)
    throw TensorShapeMismatch("predict: image does not match network input");
  const auto batch = batch_from_image(image);
  Tensor<float> logits = forward(spec, params, batch);
  ConstMatMap<float> lmap(logits.values.data(), spec.num_classes, 1);
  return softmax_columns<float>(lmap).col(0);
}

Eigen::MatrixXf predict_samples(const NetworkSpec& spec, const Params<float>& params,
                                const SampleSet& set, int begin, int end,
                                int batch_size) {
  Eigen::MatrixXf probs(spec.num_classes, end - begin);
  std::vector<int> idx;
  for (int b = begin; b < end; b += batch_size) {
    const int e = std::min(end, b + batch_size);
    idx.resize(static_cast<std::size_t>(e - b));
    std::iota(idx.begin(), idx.end(), b);
    const auto batch = batch_from_samples(set, idx);
    Tensor<float> logits = forward(spec, params, batch);
    ConstMatMap<float> lmap(logits.values.data(), spec.num_classes, e - b);
    probs.middleCols(b - begin, e - b) = softmax_columns<float>(lmap);
  }
  return probs;
}

// Instantiations: float for training and inference, double for the
// finite-difference and relevance tooling.
template struct Tensor<float>;
template struct Tensor<double>;
template Params<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template Params<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template Params<float> zeros_like<float>(const Params<float>&);
template Params<double> zeros_like<double>(const Params<double>&);
template Params<double> cast_params<double, float>(const Params<float>&);
template Params<float> cast_params<float, double>(const Params<double>&);
template Tensor<float> forward<float>(const NetworkSpec&, const Params<float>&,
                                      const Tensor<float>&, ForwardTrace<float>*);
template Tensor<double> forward<double>(const NetworkSpec&, const Params<double>&,
                                        const Tensor<double>&, ForwardTrace<double>*);
template float loss_and_grad<float>(const NetworkSpec&, const Params<float>&,
                                    const Tensor<float>&, std::span<const int>,
                                    Params<float>&);
template double loss_and_grad<double>(const NetworkSpec&, const Params<double>&,
                                      const Tensor<double>&, std::span<const int>,
                                      Params<double>&);
template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> softmax_columns<float>(
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>&);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> softmax_columns<double>(
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>&);
template AdamState<float> make_adam_state<float>(const Params<float>&);
template AdamState<double> make_adam_state<double>(const Params<double>&);
template void adam_step<float>(AdamState<float>&, Params<float>&, const Params<float>&,
                               float);
template void adam_step<double>(AdamState<double>&, Params<double>&,
                                const Params<double>&, double);

}  // namespace signbench
