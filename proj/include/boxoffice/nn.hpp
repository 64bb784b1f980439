#pragma once

// Minimal neural-network toolkit in double precision: dense, GRU and 2-D
// convolution layers with hand-written backward passes, max pooling,
// softmax cross-entropy, an L2 penalty, Adam, and a central-difference
// gradient checker.
//
// Layers keep their parameters and accumulated gradients side by side.
// forward() is const and fills an optional cache; backward() consumes the
// cache, adds into the gradient tensors and returns the input gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "boxoffice/error.hpp"
#include "boxoffice/rng.hpp"

namespace boxoffice::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;
};

/// A trainable tensor and its gradient. Only weights (not biases) are
/// subject to the L2 penalty.
struct Param {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  bool is_weight = true;
};

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

/// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-limit, limit);
}

inline void check_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw UsageError(std::string(what) + ": expected size " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

// ---------------------------------------------------------------- dense

class DenseLayer {
 public:
  struct Cache {
    std::vector<double> x;
    std::vector<double> pre;
  };

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act = Activation::relu)
      : W({out, in}), b({out}), dW({out, in}), db({out}), act_(act), in_(in), out_(out) {}

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  Activation activation() const { return act_; }

  void init(Rng& rng) {
    glorot_uniform(W, in_, out_, rng);
    b.zero();
  }

  std::vector<double> forward(std::span<const double> x, Cache* cache = nullptr) const {
    check_size(x.size(), in_, "dense forward");
    std::vector<double> pre(out_);
    for (std::size_t o = 0; o < out_; ++o) {
      double s = b[o];
      const double* w = &W.data[o * in_];
      for (std::size_t i = 0; i < in_; ++i) s += w[i] * x[i];
      pre[o] = s;
    }
    std::vector<double> y = pre;
    if (act_ == Activation::relu) {
      for (auto& v : y) v = v > 0.0 ? v : 0.0;
    }
    if (cache) {
      cache->x.assign(x.begin(), x.end());
      cache->pre = std::move(pre);
    }
    return y;
  }

  std::vector<double> backward(const Cache& cache, std::span<const double> dy) {
    check_size(dy.size(), out_, "dense backward");
    std::vector<double> dx(in_, 0.0);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = act_ == Activation::relu && cache.pre[o] <= 0.0 ? 0.0 : dy[o];
      if (g == 0.0) continue;
      db[o] += g;
      double* dw = &dW.data[o * in_];
      const double* w = &W.data[o * in_];
      for (std::size_t i = 0; i < in_; ++i) {
        dw[i] += g * cache.x[i];
        dx[i] += g * w[i];
      }
    }
    return dx;
  }

  void collect(std::vector<Param>& out, const std::string& prefix) {
    out.push_back({prefix + ".W", &W, &dW, true});
    out.push_back({prefix + ".b", &b, &db, false});
  }

  Tensor W, b;
  Tensor dW, db;

 private:
  Activation act_ = Activation::relu;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

// ---------------------------------------------------------------- GRU

/// Standard gated recurrent unit:
///   z = sigma(Wz x + Uz h + bz)
///   r = sigma(Wr x + Ur h + br)
///   c = tanh(Wh x + Uh (r * h) + bh)
///   h' = (1 - z) * h + z * c
class GruLayer {
 public:
  struct Cache {
    std::size_t steps = 0;
    std::vector<double> xs;  // steps x input
    std::vector<double> hs;  // (steps + 1) x hidden, hs[0] = h0
    std::vector<double> z, r, c;  // steps x hidden
  };

  GruLayer() = default;
  GruLayer(std::size_t input, std::size_t hidden)
      : Wz({hidden, input}), Wr({hidden, input}), Wh({hidden, input}),
        Uz({hidden, hidden}), Ur({hidden, hidden}), Uh({hidden, hidden}),
        bz({hidden}), br({hidden}), bh({hidden}),
        dWz({hidden, input}), dWr({hidden, input}), dWh({hidden, input}),
        dUz({hidden, hidden}), dUr({hidden, hidden}), dUh({hidden, hidden}),
        dbz({hidden}), dbr({hidden}), dbh({hidden}),
        input_(input), hidden_(hidden) {}

  std::size_t input() const { return input_; }
  std::size_t hidden() const { return hidden_; }

  void init(Rng& rng) {
    for (auto* w : {&Wz, &Wr, &Wh}) glorot_uniform(*w, input_, hidden_, rng);
    for (auto* u : {&Uz, &Ur, &Uh}) glorot_uniform(*u, hidden_, hidden_, rng);
    for (auto* b : {&bz, &br, &bh}) b->zero();
  }

  /// Runs `steps` steps over the row-major sequence and returns h_T.
  std::vector<double> forward(std::span<const double> seq, std::size_t steps, std::span<const double> h0,
                              Cache* cache = nullptr) const {
    if (steps < 1) throw UsageError("gru forward: need at least one step");
    check_size(seq.size(), steps * input_, "gru forward sequence");
    check_size(h0.size(), hidden_, "gru forward h0");
    const auto H = hidden_;
    std::vector<double> h(h0.begin(), h0.end());
    std::vector<double> z(H), r(H), c(H), rh(H);
    if (cache) {
      cache->steps = steps;
      cache->xs.assign(seq.begin(), seq.end());
      cache->hs.assign(h.begin(), h.end());
      cache->z.clear();
      cache->r.clear();
      cache->c.clear();
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const double* x = &seq[t * input_];
      for (std::size_t j = 0; j < H; ++j) {
        double az = bz[j] + dot_row(Wz, j, x, input_) + dot_row(Uz, j, h.data(), H);
        double ar = br[j] + dot_row(Wr, j, x, input_) + dot_row(Ur, j, h.data(), H);
        z[j] = sigmoid(az);
        r[j] = sigmoid(ar);
      }
      for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h[j];
      for (std::size_t j = 0; j < H; ++j) {
        c[j] = std::tanh(bh[j] + dot_row(Wh, j, x, input_) + dot_row(Uh, j, rh.data(), H));
      }
      for (std::size_t j = 0; j < H; ++j) h[j] = (1.0 - z[j]) * h[j] + z[j] * c[j];
      if (cache) {
        cache->z.insert(cache->z.end(), z.begin(), z.end());
        cache->r.insert(cache->r.end(), r.begin(), r.end());
        cache->c.insert(cache->c.end(), c.begin(), c.end());
        cache->hs.insert(cache->hs.end(), h.begin(), h.end());
      }
    }
    return h;
  }

  /// Back-propagation through time from dL/dh_T. Accumulates parameter
  /// gradients and returns dL/dh0.
  std::vector<double> backward(const Cache& cache, std::span<const double> dh_last,
                               std::vector<double>* dx_out = nullptr) {
    check_size(dh_last.size(), hidden_, "gru backward");
    const auto H = hidden_;
    const auto I = input_;
    std::vector<double> dh(dh_last.begin(), dh_last.end());
    std::vector<double> daz(H), dar(H), dah(H), drh(H), dprev(H), rh(H);
    if (dx_out) dx_out->assign(cache.steps * I, 0.0);
    for (std::size_t t = cache.steps; t-- > 0;) {
      const double* x = &cache.xs[t * I];
      const double* hp = &cache.hs[t * H];
      const double* z = &cache.z[t * H];
      const double* r = &cache.r[t * H];
      const double* c = &cache.c[t * H];
      for (std::size_t j = 0; j < H; ++j) {
        const double dc = dh[j] * z[j];
        const double dz = dh[j] * (c[j] - hp[j]);
        dprev[j] = dh[j] * (1.0 - z[j]);
        dah[j] = dc * (1.0 - c[j] * c[j]);
        daz[j] = dz * z[j] * (1.0 - z[j]);
        rh[j] = r[j] * hp[j];
      }
      std::fill(drh.begin(), drh.end(), 0.0);
      for (std::size_t j = 0; j < H; ++j) {
        for (std::size_t k = 0; k < H; ++k) drh[k] += Uh[j * H + k] * dah[j];
      }
      for (std::size_t k = 0; k < H; ++k) {
        dar[k] = drh[k] * hp[k] * r[k] * (1.0 - r[k]);
        dprev[k] += drh[k] * r[k];
      }
      for (std::size_t j = 0; j < H; ++j) {
        dbz[j] += daz[j];
        dbr[j] += dar[j];
        dbh[j] += dah[j];
        for (std::size_t i = 0; i < I; ++i) {
          dWz[j * I + i] += daz[j] * x[i];
          dWr[j * I + i] += dar[j] * x[i];
          dWh[j * I + i] += dah[j] * x[i];
        }
        for (std::size_t k = 0; k < H; ++k) {
          dUz[j * H + k] += daz[j] * hp[k];
          dUr[j * H + k] += dar[j] * hp[k];
          dUh[j * H + k] += dah[j] * rh[k];
          dprev[k] += Uz[j * H + k] * daz[j] + Ur[j * H + k] * dar[j];
        }
        if (dx_out) {
          double* dx = &(*dx_out)[t * I];
          for (std::size_t i = 0; i < I; ++i) {
            dx[i] += Wz[j * I + i] * daz[j] + Wr[j * I + i] * dar[j] + Wh[j * I + i] * dah[j];
          }
        }
      }
      dh = dprev;
    }
    return dh;
  }

  void collect(std::vector<Param>& out, const std::string& prefix) {
    out.push_back({prefix + ".Wz", &Wz, &dWz, true});
    out.push_back({prefix + ".Wr", &Wr, &dWr, true});
    out.push_back({prefix + ".Wh", &Wh, &dWh, true});
    out.push_back({prefix + ".Uz", &Uz, &dUz, true});
    out.push_back({prefix + ".Ur", &Ur, &dUr, true});
    out.push_back({prefix + ".Uh", &Uh, &dUh, true});
    out.push_back({prefix + ".bz", &bz, &dbz, false});
    out.push_back({prefix + ".br", &br, &dbr, false});
    out.push_back({prefix + ".bh", &bh, &dbh, false});
  }

  Tensor Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh;
  Tensor dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh;

 private:
  static double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }
  static double dot_row(const Tensor& m, std::size_t row, const double* v, std::size_t n) {
    const double* w = &m.data[row * n];
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * v[i];
    return s;
  }

  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
};

// ---------------------------------------------------------------- conv2d

enum class Padding : std::uint8_t { valid = 0, same = 1 };

/// Cross-correlation over a [channels, height, width] tensor, bias, then
/// the activation (ReLU by default).
class Conv2dLayer {
 public:
  struct Cache {
    Tensor x;
    Tensor pre;
  };

  Conv2dLayer() = default;
  Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
              Padding padding = Padding::valid, std::size_t stride = 1, Activation act = Activation::relu)
      : kernels({out_ch, in_ch, kh, kw}), bias({out_ch}), dkernels({out_ch, in_ch, kh, kw}), dbias({out_ch}),
        in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), stride_(stride), padding_(padding), act_(act) {
    if (kh < 1 || kw < 1 || stride < 1 || in_ch < 1 || out_ch < 1) {
      throw UsageError("conv2d: kernel, stride and channel counts must be at least 1");
    }
  }

  std::size_t in_channels() const { return in_ch_; }
  std::size_t out_channels() const { return out_ch_; }
  Padding padding() const { return padding_; }

  void init(Rng& rng) {
    glorot_uniform(kernels, in_ch_ * kh_ * kw_, out_ch_ * kh_ * kw_, rng);
    bias.zero();
  }

  /// Output extent along one axis and the leading zero-pad.
  std::pair<std::size_t, std::size_t> out_extent(std::size_t n, std::size_t k) const {
    if (padding_ == Padding::valid) {
      if (n < k) throw UsageError("conv2d: input smaller than kernel under valid padding");
      return {(n - k) / stride_ + 1, 0};
    }
    const auto out = (n + stride_ - 1) / stride_;
    const auto needed = (out - 1) * stride_ + k;
    const auto total = needed > n ? needed - n : 0;
    return {out, total / 2};
  }

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const {
    if (x.shape.size() != 3 || x.shape[0] != in_ch_) throw UsageError("conv2d forward: expected [in_ch, H, W] input");
    const auto H = x.shape[1];
    const auto W = x.shape[2];
    const auto [oh, pt] = out_extent(H, kh_);
    const auto [ow, pl] = out_extent(W, kw_);
    Tensor pre({out_ch_, oh, ow});
    for (std::size_t o = 0; o < out_ch_; ++o) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          double s = bias[o];
          for (std::size_t c = 0; c < in_ch_; ++c) {
            for (std::size_t u = 0; u < kh_; ++u) {
              const auto yy = static_cast<std::ptrdiff_t>(i * stride_ + u) - static_cast<std::ptrdiff_t>(pt);
              if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
              const double* xrow = &x.data[(c * H + static_cast<std::size_t>(yy)) * W];
              const double* krow = &kernels.data[((o * in_ch_ + c) * kh_ + u) * kw_];
              for (std::size_t v = 0; v < kw_; ++v) {
                const auto xx = static_cast<std::ptrdiff_t>(j * stride_ + v) - static_cast<std::ptrdiff_t>(pl);
                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
                s += krow[v] * xrow[xx];
              }
            }
          }
          pre.data[(o * oh + i) * ow + j] = s;
        }
      }
    }
    Tensor y = pre;
    if (act_ == Activation::relu) {
      for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    }
    if (cache) {
      cache->x = x;
      cache->pre = std::move(pre);
    }
    return y;
  }

  Tensor backward(const Cache& cache, const Tensor& dy) {
    const auto H = cache.x.shape[1];
    const auto W = cache.x.shape[2];
    const auto [oh, pt] = out_extent(H, kh_);
    const auto [ow, pl] = out_extent(W, kw_);
    check_size(dy.size(), out_ch_ * oh * ow, "conv2d backward");
    Tensor dx(cache.x.shape);
    for (std::size_t o = 0; o < out_ch_; ++o) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const auto idx = (o * oh + i) * ow + j;
          const double g = act_ == Activation::relu && cache.pre.data[idx] <= 0.0 ? 0.0 : dy.data[idx];
          if (g == 0.0) continue;
          dbias[o] += g;
          for (std::size_t c = 0; c < in_ch_; ++c) {
            for (std::size_t u = 0; u < kh_; ++u) {
              const auto yy = static_cast<std::ptrdiff_t>(i * stride_ + u) - static_cast<std::ptrdiff_t>(pt);
              if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(H)) continue;
              const auto xoff = (c * H + static_cast<std::size_t>(yy)) * W;
              const auto koff = ((o * in_ch_ + c) * kh_ + u) * kw_;
              for (std::size_t v = 0; v < kw_; ++v) {
                const auto xx = static_cast<std::ptrdiff_t>(j * stride_ + v) - static_cast<std::ptrdiff_t>(pl);
                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(W)) continue;
                dkernels.data[koff + v] += g * cache.x.data[xoff + static_cast<std::size_t>(xx)];
                dx.data[xoff + static_cast<std::size_t>(xx)] += g * kernels.data[koff + v];
              }
            }
          }
        }
      }
    }
    return dx;
  }

  void collect(std::vector<Param>& out, const std::string& prefix) {
    out.push_back({prefix + ".kernels", &kernels, &dkernels, true});
    out.push_back({prefix + ".bias", &bias, &dbias, false});
  }

  Tensor kernels, bias;
  Tensor dkernels, dbias;

 private:
  std::size_t in_ch_ = 0;
  std::size_t out_ch_ = 0;
  std::size_t kh_ = 1;
  std::size_t kw_ = 1;
  std::size_t stride_ = 1;
  Padding padding_ = Padding::valid;
  Activation act_ = Activation::relu;
};

// ---------------------------------------------------------------- pooling

struct PoolResult {
  Tensor y;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Window max with stride equal to the window. In ceil mode a partial
/// window at the bottom/right edge is pooled over what it covers; in floor
/// mode it is dropped, and a window larger than the input is rejected.
inline PoolResult maxpool2d(const Tensor& x, std::size_t wh, std::size_t ww, bool ceil_mode = false) {
  if (x.shape.size() != 3) throw UsageError("maxpool2d: expected [C, H, W] input");
  if (wh < 1 || ww < 1) throw UsageError("maxpool2d: window must be at least 1x1");
  const auto C = x.shape[0];
  const auto H = x.shape[1];
  const auto W = x.shape[2];
  if (!ceil_mode && (H < wh || W < ww)) throw UsageError("maxpool2d: window larger than input");
  if (H == 0 || W == 0) throw UsageError("maxpool2d: empty input");
  const auto oh = ceil_mode ? (H + wh - 1) / wh : H / wh;
  const auto ow = ceil_mode ? (W + ww - 1) / ww : W / ww;
  PoolResult r{Tensor({C, oh, ow}), std::vector<std::size_t>(C * oh * ow)};
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t u = i * wh; u < std::min(H, (i + 1) * wh); ++u) {
          for (std::size_t v = j * ww; v < std::min(W, (j + 1) * ww); ++v) {
            const auto idx = (c * H + u) * W + v;
            if (x.data[idx] > best) {
              best = x.data[idx];
              best_idx = idx;
            }
          }
        }
        const auto o = (c * oh + i) * ow + j;
        r.y.data[o] = best;
        r.argmax[o] = best_idx;
      }
    }
  }
  return r;
}

/// Per-channel maximum over the whole spatial extent; output shape [C].
inline PoolResult global_maxpool(const Tensor& x) {
  if (x.shape.size() != 3 || x.shape[1] * x.shape[2] == 0) throw UsageError("global_maxpool: expected [C, H, W] input");
  const auto C = x.shape[0];
  const auto hw = x.shape[1] * x.shape[2];
  PoolResult r{Tensor({C}), std::vector<std::size_t>(C)};
  for (std::size_t c = 0; c < C; ++c) {
    auto first = x.data.begin() + static_cast<std::ptrdiff_t>(c * hw);
    auto it = std::max_element(first, first + static_cast<std::ptrdiff_t>(hw));
    r.y.data[c] = *it;
    r.argmax[c] = static_cast<std::size_t>(it - x.data.begin());
  }
  return r;
}

/// Routes each output gradient to the input element that won the max.
inline Tensor maxpool_backward(const std::vector<std::size_t>& input_shape, const PoolResult& fwd, const Tensor& dy) {
  check_size(dy.size(), fwd.argmax.size(), "maxpool backward");
  Tensor dx(input_shape);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[fwd.argmax[o]] += dy.data[o];
  return dx;
}

// ---------------------------------------------------------------- losses

struct SoftmaxXent {
  std::vector<double> probabilities;
  double loss = 0.0;
  std::vector<double> gradient;  // dloss / dlogits = p - onehot
};

inline SoftmaxXent softmax_xent(std::span<const double> logits, std::size_t target) {
  if (logits.size() < 2) throw UsageError("softmax_xent: need at least two classes");
  if (target >= logits.size()) throw UsageError("softmax_xent: target out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  SoftmaxXent r;
  r.probabilities.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    r.probabilities[k] = std::exp(logits[k] - m);
    sum += r.probabilities[k];
  }
  for (auto& p : r.probabilities) p /= sum;
  r.loss = -((logits[target] - m) - std::log(sum));
  r.gradient = r.probabilities;
  r.gradient[target] -= 1.0;
  return r;
}

/// lambda * sum of squared weights over weight tensors (biases excluded).
/// When `add_gradient` is set, 2 * lambda * w is added to each weight's
/// gradient.
inline double l2_penalty(std::span<const Param> params, double lambda, bool add_gradient = true) {
  if (lambda < 0.0) throw UsageError("l2 lambda must be non-negative");
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.is_weight) continue;
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      const double w = p.value->data[i];
      total += w * w;
      if (add_gradient) p.grad->data[i] += 2.0 * lambda * w;
    }
  }
  return lambda * total;
}

inline void zero_grads(std::span<const Param> params) {
  for (const auto& p : params) p.grad->zero();
}

// ---------------------------------------------------------------- Adam

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every parameter.
inline void adam_step(std::span<const Param> params, AdamState& state, const AdamHyper& hyper) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value->size(), 0.0);
      state.v.emplace_back(p.value->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw UsageError("adam: parameter list changed between steps");
  state.step += 1;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].value->data;
    const auto& g = params[k].grad->data;
    check_size(g.size(), w.size(), "adam gradient");
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      w[i] -= hyper.lr * mh / (std::sqrt(vh) + hyper.epsilon);
    }
  }
}

// ---------------------------------------------------------------- gradient check

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares each parameter's stored gradient (which the caller must have
/// filled with the analytic gradient of `loss` at the current point) to
/// the central difference (f(w + eps) - f(w - eps)) / (2 eps). Relative
/// error uses the denominator max(|a|, |n|, 1e-8).
inline GradCheckReport grad_check(std::span<const Param> params, const std::function<double()>& loss,
                                  double epsilon = 1e-5) {
  if (!(epsilon > 0.0)) throw UsageError("grad_check: epsilon must be positive");
  GradCheckReport rep;
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      const double saved = p.value->data[i];
      p.value->data[i] = saved + epsilon;
      const double plus = loss();
      p.value->data[i] = saved - epsilon;
      const double minus = loss();
      p.value->data[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("grad_check: non-finite loss while perturbing " + p.name);
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p.grad->data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++rep.checked;
      if (err > rep.max_rel_error || rep.worst_param.empty()) {
        rep.max_rel_error = std::max(rep.max_rel_error, err);
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.analytic = analytic;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace boxoffice::nn
