#include <catch2/catch_amalgamated.hpp>

#include "cgc/norm.hpp"
#include "test_util.hpp"

using cgc::AffineNorm;
using cgc::Mode;
using cgc::Rng;
using cgc::Tensor;
using testutil::random_tensor;

TEST_CASE("affine_norm: zero affine kills any input") {
  Rng rng(1);
  auto nm = AffineNorm<double>::batch(3);
  nm.gamma.fill(0.0);
  nm.beta.fill(0.0);
  Tensor<double> X = random_tensor({2, 3, 4}, rng);
  Tensor<double> Y = cgc::norm_forward(nm, X, Mode::train);
  for (double v : Y.data) REQUIRE(v == 0.0);
}

TEST_CASE("affine_norm: constant input standardizes to zero in train mode") {
  auto nm = AffineNorm<double>::batch(2);
  Tensor<double> X({3, 2, 5}, 7.5);
  Tensor<double> Y = cgc::norm_forward(nm, X, Mode::train);
  for (double v : Y.data) REQUIRE(v == 0.0);
}

TEST_CASE("affine_norm: matches a two-pass statistics oracle") {
  Rng rng(2);
  auto nm = AffineNorm<double>::batch(4);
  rng.fill_uniform(nm.gamma, 0.5, 1.5);
  rng.fill_uniform(nm.beta, -0.5, 0.5);
  Tensor<double> X = random_tensor({3, 4, 6}, rng);
  Tensor<double> Y = cgc::norm_forward(nm, X, Mode::train);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    std::vector<double> vals;
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t r = 0; r < 6; ++r) vals.push_back(X.at({b, ch, r}));
    double mean = 0.0, var = 0.0;
    testutil::two_pass_stats(vals, &mean, &var);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t r = 0; r < 6; ++r) {
        const double expect =
            (X.at({b, ch, r}) - mean) / std::sqrt(var + 1e-5) * nm.gamma.data[ch] + nm.beta.data[ch];
        REQUIRE(std::abs(Y.at({b, ch, r}) - expect) < 1e-10);
      }
  }
}

TEST_CASE("affine_norm: eval without initialized running stats is an error") {
  auto nm = AffineNorm<double>::batch(2);
  Tensor<double> X({1, 2, 3}, 1.0);
  REQUIRE_THROWS_AS(cgc::norm_forward(nm, X, Mode::eval), std::runtime_error);
  nm.stats_initialized = true;
  REQUIRE_NOTHROW(cgc::norm_forward(nm, X, Mode::eval));
}

TEST_CASE("affine_norm: running statistics move toward batch statistics") {
  Rng rng(3);
  auto nm = AffineNorm<double>::batch(1);
  nm.stats_initialized = true;
  Tensor<double> X({4, 1, 8});
  rng.fill_normal(X, 2.0, 1.0);
  for (int step = 0; step < 200; ++step) cgc::norm_forward(nm, X, Mode::train);
  REQUIRE(nm.running_mean.data[0] == Catch::Approx(2.0).margin(0.4));
  // eval now roughly standardizes this batch
  Tensor<double> Y = cgc::norm_forward(nm, X, Mode::eval);
  double m = 0.0;
  for (double v : Y.data) m += v;
  REQUIRE(std::abs(m / Y.numel()) < 0.05);
}

TEST_CASE("affine_norm: layer kind normalizes each row over the trailing axis") {
  Rng rng(4);
  auto nm = AffineNorm<double>::layer(6);
  Tensor<double> X = random_tensor({3, 2, 6}, rng);
  Tensor<double> Y = cgc::norm_forward(nm, X, Mode::train);
  for (std::size_t r = 0; r < 6; ++r) {
    std::vector<double> vals(X.data.begin() + r * 6, X.data.begin() + (r + 1) * 6);
    double mean = 0.0, var = 0.0;
    testutil::two_pass_stats(vals, &mean, &var);
    for (std::size_t d = 0; d < 6; ++d) {
      const double expect = (vals[d] - mean) / std::sqrt(var + 1e-5);
      REQUIRE(std::abs(Y.data[r * 6 + d] - expect) < 1e-10);
    }
  }
}

TEST_CASE("affine_norm: width mismatch raises") {
  auto nm = AffineNorm<double>::batch(3);
  Tensor<double> X({2, 4, 5}, 1.0);
  REQUIRE_THROWS_AS(cgc::norm_forward(nm, X, Mode::train), std::invalid_argument);
}
