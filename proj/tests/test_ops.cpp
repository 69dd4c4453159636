#include <catch2/catch_amalgamated.hpp>

#include "cgc/ops.hpp"
#include "test_util.hpp"

using cgc::ConvSpec;
using cgc::PoolKind;
using cgc::Rng;
using cgc::Shape;
using cgc::Tensor;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {
ConvSpec spec2d(std::size_t s, std::size_t p, std::size_t groups = 1) {
  return ConvSpec{{s, s}, {p, p}, groups};
}
}  // namespace

TEST_CASE("conv: 1x1 scalar kernel scales the input") {
  Rng rng(1);
  Tensor<double> X = random_tensor({1, 1, 3, 3}, rng);
  Tensor<double> W({1, 1, 1, 1}, std::vector<double>{2.0});
  Tensor<double> Y = cgc::conv2d(X, W, spec2d(1, 0));
  REQUIRE(Y.shape == X.shape);
  for (std::size_t i = 0; i < X.numel(); ++i) REQUIRE(Y.data[i] == 2.0 * X.data[i]);
}

TEST_CASE("conv: padded shape arithmetic") {
  Rng rng(2);
  Tensor<double> X = random_tensor({1, 3, 5, 5}, rng);
  Tensor<double> W = random_tensor({4, 3, 3, 3}, rng);
  Tensor<double> Y = cgc::conv2d(X, W, spec2d(1, 1));
  REQUIRE(Y.shape == Shape{1, 4, 5, 5});
}

TEST_CASE("conv: matches the seven-loop oracle") {
  Rng rng(3);
  Tensor<double> X = random_tensor({1, 2, 4, 4}, rng);
  Tensor<double> W = random_tensor({3, 2, 3, 3}, rng);
  Tensor<double> Y = cgc::conv2d(X, W, spec2d(1, 1));
  Tensor<double> ref = testutil::conv2d_oracle(X, W, 1, 1, 1, 1, 1);
  REQUIRE(max_abs_diff(Y, ref) < 1e-12);

  // strided case
  Tensor<double> Xs = random_tensor({2, 3, 7, 9}, rng);
  Tensor<double> Ws = random_tensor({4, 3, 3, 3}, rng);
  Tensor<double> Ys = cgc::conv2d(Xs, Ws, spec2d(2, 1));
  REQUIRE(max_abs_diff(Ys, testutil::conv2d_oracle(Xs, Ws, 2, 2, 1, 1, 1)) < 1e-12);
}

TEST_CASE("conv: grouped equals independent per-group convolutions") {
  Rng rng(4);
  const std::size_t g = 2;
  Tensor<double> X = random_tensor({1, 4, 5, 5}, rng);
  Tensor<double> W = random_tensor({6, 2, 3, 3}, rng);
  Tensor<double> Y = cgc::conv2d(X, W, spec2d(1, 1, g));
  REQUIRE(max_abs_diff(Y, testutil::conv2d_oracle(X, W, 1, 1, 1, 1, g)) < 1e-12);

  // concatenation of slice convolutions
  for (std::size_t gi = 0; gi < g; ++gi) {
    Tensor<double> Xg({1, 2, 5, 5});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 25; ++i)
        Xg.data[c * 25 + i] = X.data[(gi * 2 + c) * 25 + i];
    Tensor<double> Wg({3, 2, 3, 3});
    std::copy(W.data.begin() + gi * 3 * 2 * 9, W.data.begin() + (gi + 1) * 3 * 2 * 9,
              Wg.data.begin());
    Tensor<double> Yg = cgc::conv2d(Xg, Wg, spec2d(1, 1));
    for (std::size_t oc = 0; oc < 3; ++oc)
      for (std::size_t i = 0; i < 25; ++i)
        REQUIRE(Yg.data[oc * 25 + i] == Y.data[(gi * 3 + oc) * 25 + i]);
  }
}

TEST_CASE("conv: shape errors name the offending axis") {
  Rng rng(5);
  Tensor<double> X = random_tensor({1, 3, 5, 5}, rng);
  Tensor<double> W = random_tensor({4, 2, 3, 3}, rng);
  REQUIRE_THROWS_WITH(cgc::conv2d(X, W, spec2d(1, 1)),
                      Catch::Matchers::ContainsSubstring("channel axis"));
  Tensor<double> W2 = random_tensor({5, 3, 3, 3}, rng);
  REQUIRE_THROWS_WITH(cgc::conv2d(X, W2, spec2d(1, 1, 2)),
                      Catch::Matchers::ContainsSubstring("not divisible by groups"));
}

TEST_CASE("conv: rank-1 spatial input") {
  Rng rng(6);
  Tensor<double> X = random_tensor({2, 3, 9}, rng);
  Tensor<double> W = random_tensor({4, 3, 3}, rng);
  ConvSpec spec{{1}, {1}, 1};
  Tensor<double> Y = cgc::conv_nd(X, W, spec);
  REQUIRE(Y.shape == Shape{2, 4, 9});
  // against the 2D path with a unit axis
  Tensor<double> Y2 = cgc::conv2d(X.reshaped({2, 3, 9, 1}), W.reshaped({4, 3, 3, 1}),
                                  ConvSpec{{1, 1}, {1, 0}, 1});
  REQUIRE(max_abs_diff(Y, Y2.reshaped({2, 4, 9})) == 0.0);
}

TEST_CASE("adaptive_pool: constant input is preserved") {
  Tensor<double> X({1, 2, 5, 7}, 3.25);
  for (auto kind : {PoolKind::avg, PoolKind::max}) {
    Tensor<double> Y = cgc::adaptive_pool(X, {3, 3}, kind);
    REQUIRE(Y.shape == Shape{1, 2, 3, 3});
    for (double v : Y.data) REQUIRE(v == 3.25);
  }
}

TEST_CASE("adaptive_pool: 4x4 window average example") {
  Tensor<double> X({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) X.data[i] = static_cast<double>(i + 1);
  Tensor<double> Y = cgc::adaptive_pool(X, {2, 2}, PoolKind::avg);
  REQUIRE(Y.data == std::vector<double>{3.5, 5.5, 11.5, 13.5});
}

TEST_CASE("adaptive_pool: identity when output equals input size") {
  Rng rng(7);
  Tensor<double> X = random_tensor({2, 3, 4, 5}, rng);
  for (auto kind : {PoolKind::avg, PoolKind::max}) {
    Tensor<double> Y = cgc::adaptive_pool(X, {4, 5}, kind);
    REQUIRE(Y.data == X.data);
  }
}

TEST_CASE("adaptive_pool: avg preserves the global mean on divisible extents") {
  Rng rng(8);
  Tensor<double> X = random_tensor({1, 2, 8, 8}, rng);
  Tensor<double> Y = cgc::adaptive_pool(X, {4, 4}, PoolKind::avg);
  double mx = 0.0, my = 0.0;
  for (double v : X.data) mx += v;
  for (double v : Y.data) my += v;
  REQUIRE(std::abs(mx / X.numel() - my / Y.numel()) < 1e-12);
}

TEST_CASE("adaptive_pool: rejects non-positive output extents") {
  Tensor<double> X({1, 1, 4, 4}, 1.0);
  REQUIRE_THROWS_AS(cgc::adaptive_pool(X, {0, 2}, PoolKind::avg), std::invalid_argument);
}

TEST_CASE("grouped_linear: identity weight passes input through") {
  Rng rng(9);
  Tensor<double> X = random_tensor({5, 4}, rng);
  Tensor<double> I({4, 4});
  for (std::size_t i = 0; i < 4; ++i) I.at({i, i}) = 1.0;
  Tensor<double> Y = cgc::grouped_linear(X, I, 1);
  REQUIRE(Y.data == X.data);
}

TEST_CASE("grouped_linear: dense oracle for g=1") {
  Rng rng(10);
  Tensor<double> X = random_tensor({2, 3, 6}, rng);
  Tensor<double> W = random_tensor({6, 4}, rng);
  Tensor<double> Y = cgc::grouped_linear(X, W, 1);
  REQUIRE(max_abs_diff(Y, testutil::dense_matmul_oracle(X, W)) < 1e-12);
}

TEST_CASE("grouped_linear: block identity and block-diagonal oracle") {
  Tensor<double> X({1, 4}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  Tensor<double> Wg({2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  Tensor<double> Y = cgc::grouped_linear(X, Wg, 2);
  REQUIRE(Y.data == X.data);

  Rng rng(11);
  Tensor<double> Xr = random_tensor({3, 8}, rng);
  Tensor<double> Wr = random_tensor({4, 3}, rng);  // g=2: 8 -> 6
  Tensor<double> Yr = cgc::grouped_linear(Xr, Wr, 2);
  Tensor<double> dense = testutil::block_diagonal_expand(Wr, 2);
  REQUIRE(max_abs_diff(Yr, testutil::dense_matmul_oracle(Xr, dense)) < 1e-12);
}

TEST_CASE("grouped_linear: divisibility violations are rejected") {
  Tensor<double> X({1, 5}, 1.0);
  Tensor<double> W({2, 2}, 1.0);
  REQUIRE_THROWS_AS(cgc::grouped_linear(X, W, 2), std::invalid_argument);
}

TEST_CASE("elementwise: sigmoid symmetry and relu definition") {
  REQUIRE(cgc::sigmoid_scalar(0.0) == 0.5);
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    REQUIRE(cgc::sigmoid_scalar(x) + cgc::sigmoid_scalar(-x) == Catch::Approx(1.0).margin(1e-15));
  }
  Tensor<double> v({3}, std::vector<double>{-1.0, 0.0, 2.0});
  REQUIRE(cgc::relu(v).data == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("elementwise: broadcasting add/mul and shape errors") {
  Tensor<double> A({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor<double> B({1, 3}, std::vector<double>{10, 20, 30});
  REQUIRE(cgc::add(A, B).data == std::vector<double>{11, 22, 33, 14, 25, 36});
  REQUIRE(cgc::mul(A, B).data == std::vector<double>{10, 40, 90, 40, 100, 180});
  Tensor<double> C({2, 2}, 1.0);
  REQUIRE_THROWS_AS(cgc::add(A, C), std::invalid_argument);
}

TEST_CASE("broadcast_reduce undoes expansion") {
  Rng rng(13);
  Tensor<double> up = random_tensor({2, 3}, rng);
  Tensor<double> red = cgc::broadcast_reduce(up, {1, 3});
  for (std::size_t j = 0; j < 3; ++j)
    REQUIRE(red.data[j] == Catch::Approx(up.at({0, j}) + up.at({1, j})));
}

TEST_CASE("softmax cross-entropy: uniform logits give ln(k)") {
  Tensor<double> logits({2, 4}, 0.0);
  const double loss = cgc::softmax_cross_entropy(logits, {1, 3});
  REQUIRE(loss == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax cross-entropy: gradient sums to zero per row") {
  Rng rng(14);
  Tensor<double> logits = random_tensor({3, 5}, rng);
  Tensor<double> grad({3, 5});
  cgc::softmax_cross_entropy(logits, {0, 2, 4}, &grad);
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 5; ++j) s += grad.at({i, j});
    REQUIRE(std::abs(s) < 1e-12);
  }
  REQUIRE_THROWS_AS(cgc::softmax_cross_entropy(logits, {0, 2, 7}), std::invalid_argument);
}

TEST_CASE("ops are deterministic") {
  Rng rng(15);
  Tensor<double> X = random_tensor({1, 3, 6, 6}, rng);
  Tensor<double> W = random_tensor({4, 3, 3, 3}, rng);
  Tensor<double> a = cgc::conv2d(X, W, spec2d(1, 1));
  Tensor<double> b = cgc::conv2d(X, W, spec2d(1, 1));
  REQUIRE(a.data == b.data);
}
