#include <catch2/catch_amalgamated.hpp>

#include "cgc/cgc.hpp"
#include "cgc/gradcheck_suite.hpp"
#include "cgc/ops.hpp"
#include "test_util.hpp"

using cgc::CgcConfig;
using cgc::CgcGrads;
using cgc::CgcParams;
using cgc::CgcVariant;
using cgc::GateCombine;
using cgc::Mode;
using cgc::Rng;
using cgc::Shape;
using cgc::Tensor;
using testutil::random_tensor;

namespace {

CgcConfig basic_config(std::size_t c, std::size_t o, std::size_t k = 3) {
  CgcConfig cfg;
  cfg.in_channels = c;
  cfg.out_channels = o;
  cfg.kernel = {k, k};
  cfg.stride = {1, 1};
  cfg.padding = {k / 2, k / 2};
  return cfg;
}

double logit(double g) { return std::log(g / (1.0 - g)); }

}  // namespace

TEST_CASE("config: latent and group defaults") {
  auto cfg = basic_config(64, 64);
  REQUIRE(cfg.latent_or_default() == 4);  // floor(9/2)
  REQUIRE(cfg.groups_or_default() == 4);  // c/16
  auto cfg7 = basic_config(3, 64, 7);
  REQUIRE(cfg7.latent_or_default() == 24);  // floor(49/2)
  REQUIRE(cfg7.groups_or_default() == 1);   // first-layer exception
  auto cfg1632 = basic_config(16, 32);
  REQUIRE(cfg1632.groups_or_default() == 1);  // c/16 = 1
  REQUIRE(cfg1632.pooled_or_default() == std::vector<std::size_t>{3, 3});
}

TEST_CASE("config: pointwise kernels are rejected at construction") {
  auto cfg = basic_config(8, 8, 1);
  REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("plain convolution"));
}

TEST_CASE("config: sum combine without channel interaction is rejected") {
  auto cfg = basic_config(8, 8);
  cfg.channel_interacting = false;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.combine = GateCombine::only_g1;
  REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("first-layer interaction weights take the full (c,o) shape") {
  Rng rng(1);
  auto p364 = cgc::make_cgc_params<double>(basic_config(3, 64), rng);
  REQUIRE(p364.I.shape == Shape{3, 64});
  auto p1632 = cgc::make_cgc_params<double>(basic_config(16, 32), rng);
  REQUIRE(p1632.I.shape == Shape{16, 32});
  auto p6464 = cgc::make_cgc_params<double>(basic_config(64, 64), rng);
  REQUIRE(p6464.I.shape == Shape{16, 16});
}

TEST_CASE("encode_context: shape and zero-init symmetry") {
  Rng rng(2);
  auto cfg = basic_config(64, 64);
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  cgc::zero_init_gate_norms(cfg, p);
  Tensor<double> X({2, 64, 8, 8}, 1.234);  // constant input
  cgc::CgcCache<double> cache;
  cgc::encode_context(X, cfg, p, Mode::train, cache);
  REQUIRE(cache.C_dec.shape == Shape{2, 64, 4});
  for (double v : cache.C_dec.data) REQUIRE(v == 0.0);  // gamma_c1 == 0
}

TEST_CASE("encode_context: permuting input channels permutes latents identically") {
  Rng rng(3);
  auto cfg = basic_config(6, 6);
  cfg.groups = 1;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  Tensor<double> X = random_tensor({1, 6, 5, 5}, rng);
  cgc::CgcCache<double> c1, c2;
  cgc::encode_context(X, cfg, p, Mode::train, c1);

  // reverse the channels
  Tensor<double> Xp = Tensor<double>::zeros_like(X);
  for (std::size_t ch = 0; ch < 6; ++ch)
    std::copy(X.data.begin() + ch * 25, X.data.begin() + (ch + 1) * 25,
              Xp.data.begin() + (5 - ch) * 25);
  cgc::encode_context(Xp, cfg, p, Mode::train, c2);
  for (std::size_t ch = 0; ch < 6; ++ch)
    for (std::size_t d = 0; d < cfg.latent_or_default(); ++d)
      REQUIRE(c2.C_dec.at({0, 5 - ch, d}) ==
              Catch::Approx(c1.C_dec.at({0, ch, d})).margin(1e-12));
}

TEST_CASE("interact_channels: identity map with pass-through norm") {
  Rng rng(4);
  auto cfg = basic_config(16, 16);
  cfg.groups = 1;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  p.I.fill(0.0);
  for (std::size_t i = 0; i < 16; ++i) p.I.at({i, i}) = 1.0;
  p.norm_o.stats_initialized = true;  // running stats are (0,1)
  cgc::CgcCache<double> cache;
  cache.C_int = random_tensor({2, 16, 4}, rng);
  cgc::interact_channels(cfg, p, Mode::eval, cache);
  REQUIRE(cache.O.shape == Shape{2, 16, 4});
  for (std::size_t i = 0; i < cache.O.numel(); ++i) {
    const double expect = std::max(0.0, cache.C_int.data[i]);
    REQUIRE(cache.O.data[i] == Catch::Approx(expect).margin(1e-4));
  }
}

TEST_CASE("interact_channels: shape arithmetic and block-diagonal oracle") {
  Rng rng(5);
  auto cfg = basic_config(32, 64);
  REQUIRE(cfg.groups_or_default() == 2);
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  p.norm_o.stats_initialized = true;
  cgc::CgcCache<double> cache;
  cache.C_int = random_tensor({3, 32, 4}, rng);
  cgc::interact_channels(cfg, p, Mode::eval, cache);
  REQUIRE(cache.O.shape == Shape{3, 64, 4});

  // per-latent-position dense oracle from the block-diagonal expansion of I
  Tensor<double> dense = testutil::block_diagonal_expand(p.I, 2);
  const double inv = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t d = 0; d < 4; ++d)
      for (std::size_t oc = 0; oc < 64; ++oc) {
        double acc = 0.0;
        for (std::size_t ic = 0; ic < 32; ++ic)
          acc += cache.C_int.at({b, ic, d}) * dense.at({ic, oc});
        const double expect = std::max(0.0, acc * inv);
        REQUIRE(cache.O.at({b, oc, d}) == Catch::Approx(expect).margin(1e-9));
      }
}

TEST_CASE("interact_channels errors when interaction is disabled") {
  Rng rng(6);
  auto cfg = basic_config(8, 8);
  cfg.combine = GateCombine::only_g1;
  cfg.channel_interacting = false;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  cgc::CgcCache<double> cache;
  cache.C_int = Tensor<double>({1, 8, 4});
  REQUIRE_THROWS_AS(cgc::interact_channels(cfg, p, Mode::train, cache), std::invalid_argument);
}

TEST_CASE("gate: zero-init gives 0.5 everywhere (0.25 for product)") {
  Rng rng(7);
  for (auto combine : {GateCombine::sum_sigmoid, GateCombine::only_g1, GateCombine::only_g2,
                       GateCombine::product}) {
    auto cfg = basic_config(8, 8);
    cfg.combine = combine;
    auto p = cgc::make_cgc_params<double>(cfg, rng);
    cgc::zero_init_gate_norms(cfg, p);
    Tensor<double> X = random_tensor({2, 8, 6, 6}, rng);
    cgc::CgcCache<double> cache;
    cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
    const double expect = combine == GateCombine::product ? 0.25 : 0.5;
    for (double v : cache.G.data) REQUIRE(v == expect);
  }
}

TEST_CASE("gate: only_g1 is independent of the output channel") {
  Rng rng(8);
  auto cfg = basic_config(6, 9);
  cfg.combine = GateCombine::only_g1;
  cfg.groups = 1;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  Tensor<double> X = random_tensor({1, 6, 6, 6}, rng);
  cgc::CgcCache<double> cache;
  cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
  for (std::size_t h = 1; h < 9; ++h)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        REQUIRE(cache.G.at({0, h, i, j}) == cache.G.at({0, 0, i, j}));
}

TEST_CASE("gate: additive logit decomposition in sum mode") {
  Rng rng(9);
  auto cfg = basic_config(6, 8);
  cfg.groups = 1;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  Tensor<double> X = random_tensor({2, 6, 7, 7}, rng);
  cgc::CgcCache<double> cache;
  cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
  // logit(G)[h,i,s] = a(i,s) + b(h,s): differences across h are independent of i
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t s = 0; s < 9; ++s)
      for (std::size_t h = 1; h < 8; ++h) {
        const double ref = logit(cache.G.at({b, h, 0, s})) - logit(cache.G.at({b, 0, 0, s}));
        for (std::size_t i = 1; i < 6; ++i) {
          const double diff = logit(cache.G.at({b, h, i, s})) - logit(cache.G.at({b, 0, i, s}));
          REQUIRE(diff == Catch::Approx(ref).margin(1e-8));
        }
      }
}

TEST_CASE("gate: strictly inside the unit interval and shaped like the kernel") {
  Rng rng(10);
  for (const auto& variant : cgc::ablation_names()) {
    auto cfg = cgc::apply_ablation(basic_config(8, 16), variant);
    auto p = cgc::make_cgc_params<double>(cfg, rng);
    Tensor<double> X = random_tensor({2, 8, 6, 6}, rng);
    cgc::CgcCache<double> cache;
    cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
    REQUIRE(cache.G.shape == Shape{2, 16, 8, 9});  // per sample: exactly W's shape
    REQUIRE(p.W.shape == Shape{16, 8, 3, 3});
    for (double v : cache.G.data) {
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
    }
  }
}

TEST_CASE("modulate_kernel follows the elementwise definition") {
  Rng rng(11);
  Tensor<double> W = random_tensor({4, 3, 3, 3}, rng);
  Tensor<double> ones(W.shape, 1.0);
  REQUIRE(cgc::modulate_kernel(W, ones).data == W.data);
  Tensor<double> halves(W.shape, 0.5);
  Tensor<double> half = cgc::modulate_kernel(W, halves);
  for (std::size_t i = 0; i < W.numel(); ++i) REQUIRE(half.data[i] == 0.5 * W.data[i]);
  Tensor<double> G = random_tensor(W.shape, rng, 0.0, 1.0);
  Tensor<double> mod = cgc::modulate_kernel(W, G);
  for (std::size_t i = 0; i < W.numel(); ++i) REQUIRE(mod.data[i] == W.data[i] * G.data[i]);
  Tensor<double> bad({2, 2}, 1.0);
  REQUIRE_THROWS_AS(cgc::modulate_kernel(W, bad), std::invalid_argument);
}

TEST_CASE("cgc_forward: zero-init equals half of the plain convolution bit-exactly") {
  Rng rng(12);
  auto cfg = basic_config(5, 7);
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  cgc::zero_init_gate_norms(cfg, p);
  Tensor<double> X = random_tensor({3, 5, 8, 8}, rng);
  Tensor<double> Y = cgc::cgc_forward(X, cfg, p, Mode::train);
  Tensor<double> ref = cgc::conv2d(X, p.W, cgc::ConvSpec{{1, 1}, {1, 1}, 1});
  REQUIRE(Y.shape == ref.shape);
  for (std::size_t i = 0; i < Y.numel(); ++i) REQUIRE(Y.data[i] == 0.5 * ref.data[i]);
}

TEST_CASE("cgc_forward: identical samples gate identically; eval is per-sample") {
  Rng rng(13);
  auto cfg = basic_config(4, 4);
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  p.norm_c1.stats_initialized = true;
  p.norm_c2.stats_initialized = true;
  p.norm_o.stats_initialized = true;
  Tensor<double> sample = random_tensor({1, 4, 6, 6}, rng);
  Tensor<double> batch({2, 4, 6, 6});
  std::copy(sample.data.begin(), sample.data.end(), batch.data.begin());
  std::copy(sample.data.begin(), sample.data.end(), batch.data.begin() + sample.numel());
  Tensor<double> Y = cgc::cgc_forward(batch, cfg, p, Mode::eval);
  const std::size_t half = Y.numel() / 2;
  for (std::size_t i = 0; i < half; ++i) REQUIRE(Y.data[i] == Y.data[half + i]);

  // replacing sample 1 leaves sample 0's eval output unchanged
  Tensor<double> batch2 = batch;
  Tensor<double> other = random_tensor({1, 4, 6, 6}, rng);
  std::copy(other.data.begin(), other.data.end(), batch2.data.begin() + sample.numel());
  Tensor<double> Y2 = cgc::cgc_forward(batch2, cfg, p, Mode::eval);
  for (std::size_t i = 0; i < half; ++i) REQUIRE(Y2.data[i] == Y.data[i]);
}

TEST_CASE("gate depends only on the pooled summary") {
  Rng rng(14);
  auto cfg = basic_config(4, 6);
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  p.norm_c1.stats_initialized = true;
  p.norm_c2.stats_initialized = true;
  p.norm_o.stats_initialized = true;
  Tensor<double> X = random_tensor({1, 4, 6, 6}, rng);
  // swapping two pixels inside one 2x2 pooling window preserves every window mean
  Tensor<double> X2 = X;
  std::swap(X2.at({0, 2, 0, 0}), X2.at({0, 2, 1, 1}));
  REQUIRE(X2.data != X.data);
  cgc::CgcCache<double> c1, c2;
  cgc::cgc_forward(X, cfg, p, Mode::eval, &c1);
  cgc::cgc_forward(X2, cfg, p, Mode::eval, &c2);
  REQUIRE(c1.G.data == c2.G.data);
}

TEST_CASE("cgc_forward: conv1d variant works end to end") {
  Rng rng(15);
  CgcConfig cfg;
  cfg.variant = CgcVariant::conv1d;
  cfg.in_channels = 4;
  cfg.out_channels = 6;
  cfg.kernel = {3};
  cfg.stride = {1};
  cfg.padding = {1};
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  REQUIRE(p.W.shape == Shape{6, 4, 3});
  Tensor<double> X = random_tensor({2, 4, 10}, rng);
  cgc::CgcCache<double> cache;
  Tensor<double> Y = cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
  REQUIRE(Y.shape == Shape{2, 6, 10});
  REQUIRE(cache.G.shape == Shape{2, 6, 4, 3});
  REQUIRE(Y.all_finite());
}

TEST_CASE("cgc backward matches finite differences for every ablation variant") {
  auto results = cgc::run_gradcheck_suite(5, "layer:");
  REQUIRE(results.size() >= 13);  // 11 ablation rows + train-mode + sequence
  for (const auto& r : results) {
    INFO(r.name << " err=" << r.max_err);
    REQUIRE(r.max_err < r.threshold);
  }
}

TEST_CASE("primitive op gradchecks stay within their thresholds") {
  auto results = cgc::run_gradcheck_suite(9, "op:");
  REQUIRE(results.size() >= 6);
  for (const auto& r : results) {
    INFO(r.name << " err=" << r.max_err);
    REQUIRE(r.max_err < r.threshold);
  }
}

TEST_CASE("sequence variant: zero-init halves the lightweight kernel") {
  Rng rng(16);
  auto cfg = cgc::gradcheck_sequence_config();
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  cgc::zero_init_gate_norms(cfg, p);
  Tensor<double> S = random_tensor({2, 8, 20}, rng);
  cgc::CgcSeqCache<double> cache;
  cgc::cgc_seq_forward(S, cfg, p, &cache);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < p.W.numel(); ++i)
      REQUIRE(cache.What.data[b * p.W.numel() + i] == 0.5 * p.W.data[i]);
}

TEST_CASE("sequence variant: short sequences are zero-padded before pooling") {
  Rng rng(17);
  auto cfg = cgc::gradcheck_sequence_config();  // k=5, pooled length 15
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  const std::size_t k = 5;
  Tensor<double> S = random_tensor({1, 8, k}, rng);  // L == k < 3k
  cgc::CgcSeqCache<double> cache;
  cgc::cgc_seq_forward(S, cfg, p, &cache);
  REQUIRE(cache.Apad.shape == Shape{1, 4, 15});  // zero-padded to (b,H,3k)
  // the first L pooled entries replicate the head means, the rest are zero
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t t = 0; t < k; ++t)
      REQUIRE(cache.P.at({0, h, t}) == cache.A.at({0, h, t}));
    for (std::size_t t = k; t < 15; ++t) REQUIRE(cache.P.at({0, h, t}) == 0.0);
  }
}

TEST_CASE("sequence variant: gate shape matches the head kernel") {
  Rng rng(18);
  CgcConfig cfg;
  cfg.variant = CgcVariant::sequence;
  cfg.in_channels = 16;
  cfg.out_channels = 16;
  cfg.kernel = {7};
  cfg.heads = 8;
  cfg.channel_interacting = false;
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  Tensor<double> S = random_tensor({3, 16, 30}, rng);
  cgc::CgcSeqCache<double> cache;
  Tensor<double> Y = cgc::cgc_seq_forward(S, cfg, p, &cache);
  REQUIRE(cache.G.shape == Shape{3, 8, 7});
  REQUIRE(Y.shape == S.shape);
}

TEST_CASE("sequence variant rejects empty sequences") {
  Rng rng(19);
  auto cfg = cgc::gradcheck_sequence_config();
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  Tensor<double> S({1, 8, 0});
  REQUIRE_THROWS_AS(cgc::cgc_seq_forward(S, cfg, p), std::invalid_argument);
}

TEST_CASE("shared decoder reuses one matrix for both gate branches") {
  Rng rng(20);
  auto cfg = cgc::apply_ablation(basic_config(8, 8), "shared-d");
  auto p = cgc::make_cgc_params<double>(cfg, rng);
  REQUIRE(p.D_o.numel() == 0);  // aliased, not allocated
  Tensor<double> X = random_tensor({2, 8, 6, 6}, rng);
  cgc::CgcCache<double> cache;
  cgc::cgc_forward(X, cfg, p, Mode::train, &cache);
  REQUIRE(cache.G.all_finite());
}
