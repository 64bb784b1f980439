#include <gtest/gtest.h>

#include <cmath>

#include "boxoffice/nn.hpp"
#include "support.hpp"

using namespace boxoffice;
using namespace boxoffice::nn;
using testing_support::random_vector;
using testing_support::weighted_sum;

namespace {

template <class Layer>
std::vector<Param> params_of(Layer& layer) {
  std::vector<Param> p;
  layer.collect(p, "layer");
  return p;
}

Tensor random_tensor(std::vector<std::size_t> dims, Rng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

// Central difference of f with respect to v[i].
double numeric_partial(std::vector<double>& v, std::size_t i, const std::function<double()>& f, double eps = 1e-5) {
  const double saved = v[i];
  v[i] = saved + eps;
  const double plus = f();
  v[i] = saved - eps;
  const double minus = f();
  v[i] = saved;
  return (plus - minus) / (2 * eps);
}

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}); }

}  // namespace

TEST(Dense, TrivialExamples) {
  DenseLayer zero(3, 2);
  const std::vector<double> x{1, -2, 3};
  EXPECT_EQ(zero.forward(x), (std::vector<double>{0, 0}));
  DenseLayer id(3, 3);
  for (std::size_t k = 0; k < 3; ++k) id.W[k * 3 + k] = 1.0;
  const std::vector<double> nonneg{0.5, 0.0, 7.0};
  EXPECT_EQ(id.forward(nonneg), nonneg);
  const std::vector<double> wrong{1.0};
  EXPECT_THROW(id.forward(wrong), UsageError);
}

TEST(Dense, LinearGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    DenseLayer layer(3, 2, Activation::identity);
    const auto params = params_of(layer);
    testing_support::randomize(params, rng);
    auto x = random_vector(3, rng);
    const auto w = random_vector(2, rng);
    const auto loss = [&] { return weighted_sum(layer.forward(x), w); };
    zero_grads(params);
    DenseLayer::Cache cache;
    layer.forward(x, &cache);
    const auto dx = layer.backward(cache, w);
    EXPECT_LT(grad_check(params, loss).max_rel_error, 1e-6) << "seed " << seed;
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(rel_err(dx[i], numeric_partial(x, i, loss)), 1e-6);
  }
}

TEST(Dense, ReluGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    DenseLayer layer(5, 4);
    const auto params = params_of(layer);
    testing_support::randomize(params, rng);
    const auto x = random_vector(5, rng);
    const auto w = random_vector(4, rng);
    zero_grads(params);
    DenseLayer::Cache cache;
    layer.forward(x, &cache);
    layer.backward(cache, w);
    EXPECT_LT(grad_check(params, [&] { return weighted_sum(layer.forward(x), w); }).max_rel_error, 1e-4);
  }
}

TEST(Gru, ZeroFixedPoint) {
  Rng rng(4);
  GruLayer gru(3, 5);
  gru.init(rng);
  const std::vector<double> seq(3 * 6, 0.0);
  const std::vector<double> h0(5, 0.0);
  EXPECT_EQ(gru.forward(seq, 6, h0), h0);
}

TEST(Gru, FrontPaddingIsAbsorbed) {
  Rng rng(5);
  GruLayer gru(3, 4);
  gru.init(rng);
  const auto body = random_vector(3 * 5, rng);
  const std::vector<double> h0(4, 0.0);
  const auto base = gru.forward(body, 5, h0);
  for (std::size_t pad : {1u, 7u, 30u}) {
    std::vector<double> seq(3 * pad, 0.0);
    seq.insert(seq.end(), body.begin(), body.end());
    EXPECT_EQ(gru.forward(seq, 5 + pad, h0), base) << pad;
  }
}

TEST(Gru, RejectsBadShapes) {
  GruLayer gru(2, 3);
  const std::vector<double> h0(3, 0.0);
  const std::vector<double> seq(5, 0.0);
  EXPECT_THROW(gru.forward(seq, 2, h0), UsageError);
  EXPECT_THROW(gru.forward({}, 0, h0), UsageError);
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(200 + seed);
    GruLayer gru(3, 4);
    const auto params = params_of(gru);
    testing_support::randomize(params, rng);
    auto seq = random_vector(3 * 4, rng);
    auto h0 = random_vector(4, rng, -0.5, 0.5);
    const auto w = random_vector(4, rng);
    const auto loss = [&] { return weighted_sum(gru.forward(seq, 4, h0), w); };
    zero_grads(params);
    GruLayer::Cache cache;
    gru.forward(seq, 4, h0, &cache);
    std::vector<double> dx;
    const auto dh0 = gru.backward(cache, w, &dx);
    EXPECT_LT(grad_check(params, loss).max_rel_error, 1e-5) << "seed " << seed;
    for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_LT(rel_err(dx[i], numeric_partial(seq, i, loss)), 1e-5);
    for (std::size_t i = 0; i < h0.size(); ++i) EXPECT_LT(rel_err(dh0[i], numeric_partial(h0, i, loss)), 1e-5);
  }
}

TEST(Conv, IdentityKernel) {
  Conv2dLayer conv(1, 1, 1, 1);
  conv.kernels[0] = 1.0;
  Tensor x({1, 2, 3});
  x.data = {0, 1, 2, 3, 4, 5};
  EXPECT_EQ(conv.forward(x), x);
}

TEST(Conv, ValidAndSameExtents) {
  Conv2dLayer valid(1, 2, 3, 3);
  EXPECT_EQ(valid.forward(Tensor({1, 6, 5})).shape, (std::vector<std::size_t>{2, 4, 3}));
  EXPECT_THROW(valid.forward(Tensor({1, 2, 5})), UsageError);
  Conv2dLayer same(1, 2, 3, 3, Padding::same);
  EXPECT_EQ(same.forward(Tensor({1, 2, 5})).shape, (std::vector<std::size_t>{2, 2, 5}));
  EXPECT_THROW(same.forward(Tensor({2, 2, 5})), UsageError);
}

TEST(Conv, MatchesDirectSum) {
  Rng rng(8);
  Conv2dLayer conv(2, 1, 3, 3, Padding::same, 1, Activation::identity);
  testing_support::randomize(params_of(conv), rng);
  const auto x = random_tensor({2, 4, 5}, rng);
  const auto y = conv.forward(x);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = conv.bias[0];
      for (std::size_t c = 0; c < 2; ++c) {
        for (int u = -1; u <= 1; ++u) {
          for (int v = -1; v <= 1; ++v) {
            const int yy = static_cast<int>(i) + u;
            const int xx = static_cast<int>(j) + v;
            if (yy < 0 || yy >= 4 || xx < 0 || xx >= 5) continue;
            s += conv.kernels[(c * 3 + (u + 1)) * 3 + (v + 1)] * x.data[(c * 4 + yy) * 5 + xx];
          }
        }
      }
      EXPECT_NEAR(y.data[i * 5 + j], s, 1e-12);
    }
  }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  for (auto padding : {Padding::valid, Padding::same}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(300 + seed);
      Conv2dLayer conv(1, 2, 3, 3, padding);
      const auto params = params_of(conv);
      testing_support::randomize(params, rng);
      auto x = random_tensor({1, 6, 6}, rng);
      Conv2dLayer::Cache cache;
      const auto y = conv.forward(x, &cache);
      const auto w = random_vector(y.size(), rng);
      const auto loss = [&] { return weighted_sum(conv.forward(x).data, w); };
      zero_grads(params);
      Tensor dy(y.shape);
      dy.data = w;
      const auto dx = conv.backward(cache, dy);
      EXPECT_LT(grad_check(params, loss).max_rel_error, 1e-5) << "seed " << seed;
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(rel_err(dx[i], numeric_partial(x.data, i, loss)), 1e-5);
    }
  }
}

TEST(Pool, Examples) {
  Tensor x({1, 2, 2});
  x.data = {1, 2, 3, 4};
  const auto r = maxpool2d(x, 2, 2);
  ASSERT_EQ(r.y.size(), 1u);
  EXPECT_EQ(r.y[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3u);
  EXPECT_THROW(maxpool2d(Tensor({1, 1, 2}), 2, 2), UsageError);
  const auto c = maxpool2d(Tensor({1, 1, 3}, 1.0), 2, 2, true);
  EXPECT_EQ(c.y.shape, (std::vector<std::size_t>{1, 1, 2}));
}

TEST(Pool, BackwardRoutesToArgmax) {
  Rng rng(1);
  const auto x = random_tensor({2, 5, 3}, rng);
  const auto r = maxpool2d(x, 2, 2, true);
  Tensor dy(r.y.shape, 1.0);
  const auto dx = maxpool_backward(x.shape, r, dy);
  double total = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    total += dx[i];
    if (dx[i] != 0.0) {
      EXPECT_TRUE(std::find(r.argmax.begin(), r.argmax.end(), i) != r.argmax.end());
    }
  }
  EXPECT_EQ(total, static_cast<double>(r.y.size()));
  const auto g = global_maxpool(x);
  EXPECT_EQ(g.y.size(), 2u);
  EXPECT_EQ(g.y[0], *std::max_element(x.data.begin(), x.data.begin() + 15));
}

TEST(Softmax, Examples) {
  const std::vector<double> zero{0, 0};
  const auto s = softmax_xent(zero, 1);
  EXPECT_DOUBLE_EQ(s.probabilities[0], 0.5);
  EXPECT_DOUBLE_EQ(s.loss, std::log(2.0));
  const std::vector<double> big{1000, 0};
  const auto b = softmax_xent(big, 0);
  EXPECT_NEAR(b.probabilities[0], 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(b.loss));
  EXPECT_THROW(softmax_xent(std::vector<double>{1.0}, 0), UsageError);
}

TEST(Softmax, SumAndShiftInvariance) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = 2 + rng.below(6);
    auto z = random_vector(k, rng, -20, 20);
    const auto a = softmax_xent(z, 0);
    double sum = 0.0;
    for (double p : a.probabilities) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const double c = rng.uniform(-100, 100);
    for (auto& v : z) v += c;
    const auto b = softmax_xent(z, 0);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(a.probabilities[i], b.probabilities[i], 1e-12);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(400 + seed);
    auto z = random_vector(4, rng, -3, 3);
    const auto target = rng.below(4);
    const auto g = softmax_xent(z, target).gradient;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double n = numeric_partial(z, i, [&] { return softmax_xent(z, target).loss; });
      EXPECT_LT(rel_err(g[i], n), 1e-7);
    }
  }
}

TEST(L2, Examples) {
  Tensor w({1}, 3.0), dw({1});
  Tensor b({2}, 5.0), db({2});
  std::vector<Param> p = {{"w", &w, &dw, true}, {"b", &b, &db, false}};
  EXPECT_NEAR(l2_penalty(p, 0.1), 0.9, 1e-12);
  EXPECT_NEAR(dw[0], 0.6, 1e-12);
  EXPECT_EQ(db[0], 0.0);
  EXPECT_EQ(l2_penalty(std::vector<Param>{p[1]}, 0.1), 0.0);
  EXPECT_EQ(l2_penalty(p, 0.0), 0.0);
  EXPECT_THROW(l2_penalty(p, -1.0), UsageError);
}

TEST(Adam, QuadraticConverges) {
  Tensor w({1}, 1.0), dw({1});
  std::vector<Param> p = {{"w", &w, &dw, true}};
  AdamState state;
  AdamHyper hyper;
  hyper.lr = 0.1;
  double prev = 1.0;
  bool reached = false;
  for (int step = 0; step < 200 && !reached; ++step) {
    dw[0] = 2.0 * w[0];
    adam_step(p, state, hyper);
    EXPECT_LT(std::abs(w[0]), prev) << "step " << step;
    prev = std::abs(w[0]);
    reached = prev < 0.01;
  }
  EXPECT_TRUE(reached);
}

TEST(Adam, ZeroAndConstantGradients) {
  Tensor w({3}, 0.5), dw({3});
  std::vector<Param> p = {{"w", &w, &dw, true}};
  AdamState state;
  for (int k = 0; k < 10; ++k) adam_step(p, state, {});
  EXPECT_EQ(w, Tensor({3}, 0.5));
  dw.data = {1.0, -1.0, 0.0};
  for (int k = 0; k < 10; ++k) adam_step(p, state, {});
  EXPECT_LT(w[0], 0.5);
  EXPECT_GT(w[1], 0.5);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  Rng rng(9);
  DenseLayer layer(3, 2, Activation::identity);
  const auto params = params_of(layer);
  testing_support::randomize(params, rng);
  const auto x = random_vector(3, rng);
  const auto w = random_vector(2, rng);
  zero_grads(params);
  DenseLayer::Cache cache;
  layer.forward(x, &cache);
  layer.backward(cache, w);
  for (auto& v : layer.dW.data) v *= 1.1;
  const auto rep = grad_check(params, [&] { return weighted_sum(layer.forward(x), w); });
  EXPECT_NEAR(rep.max_rel_error, 0.1 / 1.1, 1e-4);
  EXPECT_EQ(rep.worst_param, "layer.W");
  EXPECT_THROW(grad_check(params, [] { return std::nan(""); }), NumericError);
  EXPECT_THROW(grad_check(params, [] { return 0.0; }, 0.0), UsageError);
}

TEST(Forward, IsPure) {
  Rng rng(3);
  GruLayer gru(2, 3);
  gru.init(rng);
  const auto seq = random_vector(6, rng);
  const std::vector<double> h0(3, 0.0);
  EXPECT_EQ(gru.forward(seq, 3, h0), gru.forward(seq, 3, h0));
}
