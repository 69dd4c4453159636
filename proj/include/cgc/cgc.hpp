#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgc/norm.hpp"
#include "cgc/ops.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

// Context-gated convolution: the kernel W (o,c,k1,k2) is modulated per sample
// by a gate G = sigma(G1 + G2) built from a pooled global summary of the
// input. G1 (c,k1,k2) comes from the encoded context, G2 (o,k1,k2) from the
// channel-interacted projection of that context.

enum class GateCombine { sum_sigmoid, only_g1, only_g2, product };

enum class CgcVariant { conv2d, conv1d, sequence };

struct CgcConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<std::size_t> kernel;   // (k1,k2) or (k,)
  std::vector<std::size_t> stride;   // empty -> all ones
  std::vector<std::size_t> padding;  // empty -> all zeros
  std::size_t latent = 0;            // d; 0 selects the default bottleneck width
  std::size_t groups = 0;            // g; 0 selects the default rule
  std::vector<std::size_t> pooled;   // empty -> kernel extents
  PoolKind pool_kind = PoolKind::avg;
  GateCombine combine = GateCombine::sum_sigmoid;
  bool shared_norm = false;
  bool shared_decoder = false;
  bool two_encoders = false;
  bool channel_interacting = true;
  CgcVariant variant = CgcVariant::conv2d;
  std::size_t heads = 0;  // sequence variant only

  std::size_t spatial_rank() const { return kernel.size(); }
  std::size_t kernel_size() const { return shape_numel(kernel); }

  /// Bottleneck latent width: floor(k1*k2/2) clamped to at least 1. The
  /// sequence variant's kernel is rank 1, so this halves the kernel length.
  std::size_t latent_or_default() const {
    if (latent) return latent;
    const std::size_t base = kernel_size() / 2;
    return base ? base : 1;
  }

  /// Interaction groups: g = c/16 when both channel counts are multiples of
  /// 16 (and the grouping divides o), otherwise a full linear map with g = 1.
  std::size_t groups_or_default() const {
    if (groups) return groups;
    if (in_channels % 16 == 0 && out_channels % 16 == 0) {
      const std::size_t g = in_channels / 16;
      if (g > 0 && out_channels % g == 0) return g;
    }
    return 1;
  }

  std::vector<std::size_t> pooled_or_default() const {
    if (!pooled.empty()) return pooled;
    if (variant == CgcVariant::sequence) return {3 * kernel.at(0)};
    return kernel;
  }

  std::vector<std::size_t> stride_or_default() const {
    return stride.empty() ? std::vector<std::size_t>(spatial_rank(), 1) : stride;
  }

  std::vector<std::size_t> padding_or_default() const {
    return padding.empty() ? std::vector<std::size_t>(spatial_rank(), 0) : padding;
  }

  bool needs_g1() const {
    if (variant == CgcVariant::sequence) return true;
    return combine != GateCombine::only_g2;
  }
  bool needs_g2() const {
    if (variant == CgcVariant::sequence) return false;
    return combine != GateCombine::only_g1;
  }

  // Parameter presence, shared between the layer and the cost accounting.
  bool has_E2() const { return two_encoders && needs_g2() && needs_g1(); }
  bool has_norm_c1() const { return needs_g1(); }
  bool has_norm_c2() const { return needs_g2() && !(shared_norm && needs_g1()) && needs_g1(); }
  // A single-branch only_g2 layer owns one context norm; it lives in norm_c2.
  bool has_norm_c2_solo() const { return needs_g2() && !needs_g1(); }
  bool has_interact() const { return needs_g2() && channel_interacting; }
  bool has_D_c() const { return needs_g1(); }
  bool has_D_o() const { return needs_g2() && !(shared_decoder && needs_g1()); }

  void validate() const {
    if (in_channels == 0 || out_channels == 0)
      throw std::invalid_argument("cgc: channel counts must be positive");
    if (variant == CgcVariant::sequence) {
      if (kernel.size() != 1)
        throw std::invalid_argument("cgc sequence: kernel must be rank 1");
      if (kernel[0] < 2 || kernel[0] % 2 == 0)
        throw std::invalid_argument("cgc sequence: kernel length must be odd and > 1");
      if (channel_interacting)
        throw std::invalid_argument("cgc sequence: channel interaction is removed; set channel_interacting=false");
      if (heads == 0 || in_channels % heads != 0)
        throw std::invalid_argument("cgc sequence: channels " + std::to_string(in_channels) +
                                    " must divide into heads " + std::to_string(heads));
      return;
    }
    const std::size_t rank = spatial_rank();
    if (rank != 1 && rank != 2)
      throw std::invalid_argument("cgc: spatial rank must be 1 or 2");
    if (variant == CgcVariant::conv1d && rank != 1)
      throw std::invalid_argument("cgc conv1d: kernel must be rank 1");
    if (variant == CgcVariant::conv2d && rank != 2)
      throw std::invalid_argument("cgc conv2d: kernel must be rank 2");
    if (kernel_size() <= 1)
      throw std::invalid_argument(
          "cgc: kernel has spatial size 1; pointwise convolutions are linear maps and are not "
          "gated, use a plain convolution");
    if (!stride.empty() && stride.size() != rank)
      throw std::invalid_argument("cgc: stride rank mismatch");
    if (!padding.empty() && padding.size() != rank)
      throw std::invalid_argument("cgc: padding rank mismatch");
    if (!pooled.empty() && pooled.size() != rank)
      throw std::invalid_argument("cgc: pooled extents rank mismatch");
    for (std::size_t p : pooled_or_default())
      if (p == 0) throw std::invalid_argument("cgc: pooled extents must be positive");
    if (!channel_interacting && needs_g2())
      throw std::invalid_argument("cgc: combine mode needs the G2 branch but channel_interacting "
                                  "is false; use only_g1 or the sequence variant");
    if (has_interact()) {
      const std::size_t g = groups_or_default();
      if (in_channels % g != 0 || out_channels % g != 0)
        throw std::invalid_argument("cgc: channels (" + std::to_string(in_channels) + "," +
                                    std::to_string(out_channels) + ") not divisible by groups " +
                                    std::to_string(g));
    }
  }
};

/// Learnable state of one CGC layer. Absent tensors (per config) stay empty.
template <typename T>
struct CgcParams {
  Tensor<T> W;    // (o,c,k1,k2) / (o,c,k); sequence: the (H,k) lightweight kernel
  Tensor<T> E;    // (pooled_size, d)
  Tensor<T> E2;   // optional second encoder for the interact branch
  Tensor<T> I;    // (c/g, o/g)
  Tensor<T> D_c;  // (d, k1*k2)
  Tensor<T> D_o;  // (d, k1*k2); aliased to D_c when shared_decoder
  AffineNorm<T> norm_c1;
  AffineNorm<T> norm_c2;
  AffineNorm<T> norm_o;
};

// Gradient mirror of CgcParams; same shapes, accumulated by the backward pass.
template <typename T>
struct CgcGrads {
  Tensor<T> W, E, E2, I, D_c, D_o;
  Tensor<T> gamma_c1, beta_c1, gamma_c2, beta_c2, gamma_o, beta_o;
};

template <typename T>
CgcGrads<T> make_zero_grads(const CgcConfig& cfg, const CgcParams<T>& p) {
  CgcGrads<T> g;
  g.W = Tensor<T>::zeros_like(p.W);
  g.E = Tensor<T>::zeros_like(p.E);
  if (cfg.has_E2()) g.E2 = Tensor<T>::zeros_like(p.E2);
  if (cfg.has_interact()) g.I = Tensor<T>::zeros_like(p.I);
  if (cfg.has_D_c()) g.D_c = Tensor<T>::zeros_like(p.D_c);
  if (cfg.has_D_o()) g.D_o = Tensor<T>::zeros_like(p.D_o);
  if (cfg.has_norm_c1()) {
    g.gamma_c1 = Tensor<T>::zeros_like(p.norm_c1.gamma);
    g.beta_c1 = Tensor<T>::zeros_like(p.norm_c1.beta);
  }
  if (cfg.has_norm_c2() || cfg.has_norm_c2_solo()) {
    g.gamma_c2 = Tensor<T>::zeros_like(p.norm_c2.gamma);
    g.beta_c2 = Tensor<T>::zeros_like(p.norm_c2.beta);
  }
  if (cfg.has_interact()) {
    g.gamma_o = Tensor<T>::zeros_like(p.norm_o.gamma);
    g.beta_o = Tensor<T>::zeros_like(p.norm_o.beta);
  }
  return g;
}

/// Fan-in scaled parameter construction. Gate-path norms start as ordinary
/// affines (gamma=1); training initialization zeroes them separately.
template <typename T>
CgcParams<T> make_cgc_params(const CgcConfig& cfg, Rng& rng) {
  cfg.validate();
  CgcParams<T> p;
  const std::size_t c = cfg.in_channels, o = cfg.out_channels;
  const std::size_t s = cfg.kernel_size();
  const std::size_t d = cfg.latent_or_default();

  if (cfg.variant == CgcVariant::sequence) {
    const std::size_t k = cfg.kernel[0];
    const std::size_t m = 3 * k;
    p.W = Tensor<T>({cfg.heads, k});
    rng.fill_normal(p.W, 0.0, std::sqrt(2.0 / static_cast<double>(k)));
    p.E = Tensor<T>({m, d});
    rng.fill_normal(p.E, 0.0, std::sqrt(2.0 / static_cast<double>(m)));
    p.D_c = Tensor<T>({d, k});
    rng.fill_normal(p.D_c, 0.0, std::sqrt(2.0 / static_cast<double>(d)));
    p.norm_c1 = AffineNorm<T>::layer(d);
    return p;
  }

  Shape wshape{o, c};
  for (std::size_t k : cfg.kernel) wshape.push_back(k);
  p.W = Tensor<T>(wshape);
  rng.fill_normal(p.W, 0.0, std::sqrt(2.0 / static_cast<double>(c * s)));

  const std::size_t m = shape_numel(cfg.pooled_or_default());
  p.E = Tensor<T>({m, d});
  rng.fill_normal(p.E, 0.0, std::sqrt(2.0 / static_cast<double>(m)));
  if (cfg.has_E2()) {
    p.E2 = Tensor<T>({m, d});
    rng.fill_normal(p.E2, 0.0, std::sqrt(2.0 / static_cast<double>(m)));
  }
  if (cfg.has_interact()) {
    const std::size_t g = cfg.groups_or_default();
    p.I = Tensor<T>({c / g, o / g});
    rng.fill_normal(p.I, 0.0, std::sqrt(2.0 / static_cast<double>(c / g)));
    p.norm_o = AffineNorm<T>::batch(o);
  }
  if (cfg.has_D_c()) {
    p.D_c = Tensor<T>({d, s});
    rng.fill_normal(p.D_c, 0.0, std::sqrt(2.0 / static_cast<double>(d)));
  }
  if (cfg.has_D_o()) {
    p.D_o = Tensor<T>({d, s});
    rng.fill_normal(p.D_o, 0.0, std::sqrt(2.0 / static_cast<double>(d)));
  }
  if (cfg.has_norm_c1()) p.norm_c1 = AffineNorm<T>::batch(c);
  if (cfg.has_norm_c2() || cfg.has_norm_c2_solo()) p.norm_c2 = AffineNorm<T>::batch(c);
  return p;
}

/// Zeroes the affines of every norm that feeds a gate decoder, which pins all
/// gates to sigma(0) = 0.5 at the start of training.
template <typename T>
void zero_init_gate_norms(const CgcConfig& cfg, CgcParams<T>& p) {
  if (cfg.variant == CgcVariant::sequence) {
    p.norm_c1.gamma.fill(T(0));
    p.norm_c1.beta.fill(T(0));
    return;
  }
  if (cfg.has_norm_c1()) {
    p.norm_c1.gamma.fill(T(0));
    p.norm_c1.beta.fill(T(0));
  }
  if (cfg.has_norm_c2_solo()) {
    // Single-branch only_g2: the context norm feeds the decoder through the
    // interact module; norm_o below already forces the constant gate.
  }
  if (cfg.has_interact()) {
    p.norm_o.gamma.fill(T(0));
    p.norm_o.beta.fill(T(0));
  }
}

template <typename T>
struct CgcCache {
  Tensor<T> X;  // canonical (b,c,h,w)
  Shape input_shape;
  Tensor<T> Pf;      // (b,c,m)
  std::vector<std::size_t> pool_argmax;
  Tensor<T> C_raw, C2_raw;  // (b,c,d)
  NormCache<T> nc1, nc2, no;
  Tensor<T> n1, n2, n3;
  Tensor<T> C_dec, C_int;  // (b,c,d)
  Tensor<T> O_raw, O;      // (b,o,d)
  Tensor<T> G1p, G2p;      // (b,c,s), (b,o,s)
  Tensor<T> S1, S2;        // sigmoids for only/product modes
  Tensor<T> G;             // (b,o,c,s)
  Tensor<T> What;          // (b,o,c,k1,k2) canonical
  Mode mode = Mode::train;
  bool shared_norm_single_apply = false;
};

namespace detail {

template <typename T>
Tensor<T> swap_axes_12(const Tensor<T>& X) {
  if (X.rank() != 3) throw std::invalid_argument("swap_axes_12: rank-3 tensor expected");
  const std::size_t a = X.shape[0], b = X.shape[1], c = X.shape[2];
  Tensor<T> Y({a, c, b});
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < c; ++k)
        Y.data[(i * c + k) * b + j] = X.data[(i * b + j) * c + k];
  return Y;
}

template <typename T>
Tensor<T> canonical_4d(const Tensor<T>& X, std::size_t rank) {
  if (rank == 1) return with_unit_axis(X);
  return X;
}

}  // namespace detail

/// Context Encoding Module: pool to the configured summary size, project each
/// channel's flattened summary through the shared encoder, normalize per
/// branch, ReLU. Returns the decode-branch and interact-branch latents.
template <typename T>
void encode_context(const Tensor<T>& X4, const CgcConfig& cfg, CgcParams<T>& p, Mode mode,
                    CgcCache<T>& cache) {
  const auto pooled = cfg.pooled_or_default();
  std::vector<std::size_t> pooled2 = pooled;
  if (pooled2.size() == 1) pooled2.push_back(1);
  Tensor<T> P = adaptive_pool(X4, pooled2, cfg.pool_kind,
                              cfg.pool_kind == PoolKind::max ? &cache.pool_argmax : nullptr);
  const std::size_t b = X4.shape[0], c = X4.shape[1];
  const std::size_t m = shape_numel(pooled);
  cache.Pf = P.reshaped({b, c, m});

  cache.C_raw = matmul_last(cache.Pf, p.E);
  if (cfg.needs_g2()) cache.C2_raw = cfg.has_E2() ? matmul_last(cache.Pf, p.E2) : cache.C_raw;

  cache.shared_norm_single_apply = cfg.shared_norm && cfg.needs_g1() && cfg.needs_g2() && !cfg.has_E2();
  if (cfg.needs_g1()) {
    cache.n1 = norm_forward(p.norm_c1, cache.C_raw, mode, &cache.nc1);
    cache.C_dec = relu(cache.n1);
  }
  if (cfg.needs_g2()) {
    if (cache.shared_norm_single_apply) {
      cache.n2 = cache.n1;
      cache.C_int = cache.C_dec;
    } else if (cfg.shared_norm && cfg.needs_g1()) {
      cache.n2 = norm_forward(p.norm_c1, cache.C2_raw, mode, &cache.nc2);
      cache.C_int = relu(cache.n2);
    } else {
      cache.n2 = norm_forward(p.norm_c2, cache.C2_raw, mode, &cache.nc2);
      cache.C_int = relu(cache.n2);
    }
  }
}

/// Channel Interacting Module: the shared grouped linear map from c input
/// channels to o output channels, applied independently at every latent
/// position, then norm and ReLU.
template <typename T>
void interact_channels(const CgcConfig& cfg, CgcParams<T>& p, Mode mode, CgcCache<T>& cache) {
  if (!cfg.has_interact())
    throw std::invalid_argument("interact_channels: channel_interacting is disabled");
  Tensor<T> Ct = detail::swap_axes_12(cache.C_int);          // (b,d,c)
  Tensor<T> Ot = grouped_linear(Ct, p.I, cfg.groups_or_default());  // (b,d,o)
  cache.O_raw = detail::swap_axes_12(Ot);                    // (b,o,d)
  cache.n3 = norm_forward(p.norm_o, cache.O_raw, mode, &cache.no);
  cache.O = relu(cache.n3);
}

/// Gate Decoding Module: project latents back to kernel positions and combine
/// into the full per-sample gate (b,o,c,s).
template <typename T>
void decode_gate(const CgcConfig& cfg, CgcParams<T>& p, CgcCache<T>& cache) {
  const std::size_t s = cfg.kernel_size();
  const std::size_t b = cache.Pf.shape[0];
  const std::size_t c = cfg.in_channels, o = cfg.out_channels;
  if (cfg.needs_g1()) cache.G1p = matmul_last(cache.C_dec, p.D_c);
  if (cfg.needs_g2()) {
    const Tensor<T>& D = (cfg.shared_decoder && cfg.needs_g1()) ? p.D_c : p.D_o;
    cache.G2p = matmul_last(cache.O, D);
  }

  cache.G = Tensor<T>({b, o, c, s});
  switch (cfg.combine) {
    case GateCombine::sum_sigmoid:
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j)
              cache.G.data[((bi * o + h) * c + i) * s + j] = sigmoid_scalar(
                  cache.G1p.data[(bi * c + i) * s + j] + cache.G2p.data[(bi * o + h) * s + j]);
      break;
    case GateCombine::only_g1:
      cache.S1 = sigmoid(cache.G1p);
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j)
              cache.G.data[((bi * o + h) * c + i) * s + j] = cache.S1.data[(bi * c + i) * s + j];
      break;
    case GateCombine::only_g2:
      cache.S2 = sigmoid(cache.G2p);
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j)
              cache.G.data[((bi * o + h) * c + i) * s + j] = cache.S2.data[(bi * o + h) * s + j];
      break;
    case GateCombine::product:
      cache.S1 = sigmoid(cache.G1p);
      cache.S2 = sigmoid(cache.G2p);
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j)
              cache.G.data[((bi * o + h) * c + i) * s + j] =
                  cache.S1.data[(bi * c + i) * s + j] * cache.S2.data[(bi * o + h) * s + j];
      break;
  }
}

/// W-hat = W elementwise-scaled by the per-sample gate.
template <typename T>
Tensor<T> modulate_kernel(const Tensor<T>& W, const Tensor<T>& G_sample) {
  if (W.numel() != G_sample.numel())
    throw std::invalid_argument("modulate_kernel: gate shape " + shape_str(G_sample.shape) +
                                " does not match kernel " + shape_str(W.shape));
  Tensor<T> out = W;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= G_sample.data[i];
  return out;
}

/// Full layer forward. Input (b,c,h,w) for conv2d, (b,c,L) for conv1d.
template <typename T>
Tensor<T> cgc_forward(const Tensor<T>& X, const CgcConfig& cfg, CgcParams<T>& p, Mode mode,
                      CgcCache<T>* cache_out = nullptr) {
  cfg.validate();
  if (cfg.variant == CgcVariant::sequence)
    throw std::invalid_argument("cgc_forward: use cgc_seq_forward for the sequence variant");
  const std::size_t rank = cfg.spatial_rank();
  if (X.rank() != 2 + rank)
    throw std::invalid_argument("cgc_forward: input " + shape_str(X.shape) +
                                " does not match spatial rank " + std::to_string(rank));
  if (X.shape[1] != cfg.in_channels)
    throw std::invalid_argument("cgc_forward: input channel axis " + std::to_string(X.shape[1]) +
                                " != configured " + std::to_string(cfg.in_channels));

  CgcCache<T> local;
  CgcCache<T>& cache = cache_out ? *cache_out : local;
  cache.mode = mode;
  cache.input_shape = X.shape;
  cache.X = detail::canonical_4d(X, rank);

  encode_context(cache.X, cfg, p, mode, cache);
  if (cfg.needs_g2()) interact_channels(cfg, p, mode, cache);
  decode_gate(cfg, p, cache);

  const std::size_t b = cache.X.shape[0];
  const std::size_t o = cfg.out_channels, c = cfg.in_channels;
  const std::size_t s = cfg.kernel_size();
  const std::size_t k1 = cfg.kernel[0];
  const std::size_t k2 = rank == 2 ? cfg.kernel[1] : 1;

  ConvSpec spec;
  spec.stride = cfg.stride_or_default();
  spec.padding = cfg.padding_or_default();
  if (rank == 1) {
    spec.stride.push_back(1);
    spec.padding.push_back(0);
  }
  spec.groups = 1;

  cache.What = Tensor<T>({b, o, c, k1, k2});
  Tensor<T> Y;
  for (std::size_t bi = 0; bi < b; ++bi) {
    Tensor<T> Wb({o, c, k1, k2});
    const T* g = cache.G.ptr() + bi * o * c * s;
    for (std::size_t i = 0; i < o * c * s; ++i) Wb.data[i] = p.W.data[i] * g[i];
    std::copy(Wb.data.begin(), Wb.data.end(), cache.What.data.begin() + bi * o * c * s);
    Tensor<T> Xb({1, c, cache.X.shape[2], cache.X.shape[3]});
    std::copy(cache.X.data.begin() + bi * c * cache.X.shape[2] * cache.X.shape[3],
              cache.X.data.begin() + (bi + 1) * c * cache.X.shape[2] * cache.X.shape[3],
              Xb.data.begin());
    Tensor<T> Yb = conv2d(Xb, Wb, spec);
    if (bi == 0) Y = Tensor<T>({b, o, Yb.shape[2], Yb.shape[3]});
    std::copy(Yb.data.begin(), Yb.data.end(), Y.data.begin() + bi * Yb.numel());
  }
  if (rank == 1) return Y.reshaped({Y.shape[0], Y.shape[1], Y.shape[2]});
  return Y;
}

/// Full layer backward; accumulates into `grads`, returns dX.
template <typename T>
Tensor<T> cgc_backward(const Tensor<T>& dY_in, const CgcConfig& cfg, CgcParams<T>& p,
                       CgcCache<T>& cache, CgcGrads<T>& grads) {
  const std::size_t rank = cfg.spatial_rank();
  const Tensor<T> dY = rank == 1 ? detail::with_unit_axis(dY_in) : dY_in;
  const std::size_t b = cache.X.shape[0];
  const std::size_t o = cfg.out_channels, c = cfg.in_channels;
  const std::size_t s = cfg.kernel_size();
  const std::size_t k1 = cfg.kernel[0];
  const std::size_t k2 = rank == 2 ? cfg.kernel[1] : 1;
  const std::size_t plane = cache.X.shape[2] * cache.X.shape[3];

  ConvSpec spec;
  spec.stride = cfg.stride_or_default();
  spec.padding = cfg.padding_or_default();
  if (rank == 1) {
    spec.stride.push_back(1);
    spec.padding.push_back(0);
  }
  spec.groups = 1;

  Tensor<T> dX = Tensor<T>::zeros_like(cache.X);
  Tensor<T> dG({b, o, c, s});
  for (std::size_t bi = 0; bi < b; ++bi) {
    Tensor<T> Xb({1, c, cache.X.shape[2], cache.X.shape[3]});
    std::copy(cache.X.data.begin() + bi * c * plane, cache.X.data.begin() + (bi + 1) * c * plane,
              Xb.data.begin());
    Tensor<T> Wb({o, c, k1, k2});
    std::copy(cache.What.data.begin() + bi * o * c * s,
              cache.What.data.begin() + (bi + 1) * o * c * s, Wb.data.begin());
    Tensor<T> dYb({1, o, dY.shape[2], dY.shape[3]});
    std::copy(dY.data.begin() + bi * o * dY.shape[2] * dY.shape[3],
              dY.data.begin() + (bi + 1) * o * dY.shape[2] * dY.shape[3], dYb.data.begin());
    Tensor<T> dXb = Tensor<T>::zeros_like(Xb);
    Tensor<T> dWb = Tensor<T>::zeros_like(Wb);
    conv2d_backward(Xb, Wb, spec, dYb, &dXb, &dWb);
    for (std::size_t i = 0; i < c * plane; ++i) dX.data[bi * c * plane + i] += dXb.data[i];
    const T* g = cache.G.ptr() + bi * o * c * s;
    T* dg = dG.ptr() + bi * o * c * s;
    for (std::size_t i = 0; i < o * c * s; ++i) {
      grads.W.data[i] += dWb.data[i] * g[i];
      dg[i] = dWb.data[i] * p.W.data[i];
    }
  }

  // Combine backward -> dG1p (b,c,s), dG2p (b,o,s).
  Tensor<T> dG1p, dG2p;
  if (cfg.needs_g1()) dG1p = Tensor<T>({b, c, s});
  if (cfg.needs_g2()) dG2p = Tensor<T>({b, o, s});
  switch (cfg.combine) {
    case GateCombine::sum_sigmoid:
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t off = ((bi * o + h) * c + i) * s + j;
              const T gv = cache.G.data[off];
              const T dpre = dG.data[off] * gv * (T(1) - gv);
              dG1p.data[(bi * c + i) * s + j] += dpre;
              dG2p.data[(bi * o + h) * s + j] += dpre;
            }
      break;
    case GateCombine::only_g1:
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t cj = (bi * c + i) * s + j;
              const T sv = cache.S1.data[cj];
              dG1p.data[cj] += dG.data[((bi * o + h) * c + i) * s + j] * sv * (T(1) - sv);
            }
      break;
    case GateCombine::only_g2:
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t oj = (bi * o + h) * s + j;
              const T sv = cache.S2.data[oj];
              dG2p.data[oj] += dG.data[((bi * o + h) * c + i) * s + j] * sv * (T(1) - sv);
            }
      break;
    case GateCombine::product:
      for (std::size_t bi = 0; bi < b; ++bi)
        for (std::size_t h = 0; h < o; ++h)
          for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < s; ++j) {
              const std::size_t cj = (bi * c + i) * s + j;
              const std::size_t oj = (bi * o + h) * s + j;
              const T s1 = cache.S1.data[cj], s2 = cache.S2.data[oj];
              const T up = dG.data[((bi * o + h) * c + i) * s + j];
              dG1p.data[cj] += up * s2 * s1 * (T(1) - s1);
              dG2p.data[oj] += up * s1 * s2 * (T(1) - s2);
            }
      break;
  }

  // Decoder backward.
  Tensor<T> dC_dec, dO;
  if (cfg.needs_g1()) {
    dC_dec = Tensor<T>::zeros_like(cache.C_dec);
    matmul_last_backward(cache.C_dec, p.D_c, dG1p, &dC_dec, &grads.D_c);
  }
  if (cfg.needs_g2()) {
    dO = Tensor<T>::zeros_like(cache.O);
    const bool aliased = cfg.shared_decoder && cfg.needs_g1();
    matmul_last_backward(cache.O, aliased ? p.D_c : p.D_o, dG2p, &dO,
                         aliased ? &grads.D_c : &grads.D_o);
  }

  // Interact backward.
  Tensor<T> dC_int;
  if (cfg.needs_g2()) {
    Tensor<T> dn3 = relu_backward(cache.n3, dO);
    Tensor<T> dO_raw = norm_backward(p.norm_o, cache.no, dn3, &grads.gamma_o, &grads.beta_o);
    Tensor<T> dOt = detail::swap_axes_12(dO_raw);  // (b,d,o)
    Tensor<T> Ct = detail::swap_axes_12(cache.C_int);
    Tensor<T> dCt = Tensor<T>::zeros_like(Ct);
    grouped_linear_backward(Ct, p.I, cfg.groups_or_default(), dOt, &dCt, &grads.I);
    dC_int = detail::swap_axes_12(dCt);  // (b,c,d)
  }

  // Branch norms backward -> dC_raw / dC2_raw.
  Tensor<T> dC_raw, dC2_raw;
  if (cache.shared_norm_single_apply) {
    Tensor<T> dn = relu_backward(cache.n1, dC_dec);
    Tensor<T> dn_int = relu_backward(cache.n1, dC_int);
    for (std::size_t i = 0; i < dn.numel(); ++i) dn.data[i] += dn_int.data[i];
    dC_raw = norm_backward(p.norm_c1, cache.nc1, dn, &grads.gamma_c1, &grads.beta_c1);
  } else {
    if (cfg.needs_g1()) {
      Tensor<T> dn1 = relu_backward(cache.n1, dC_dec);
      dC_raw = norm_backward(p.norm_c1, cache.nc1, dn1, &grads.gamma_c1, &grads.beta_c1);
    }
    if (cfg.needs_g2()) {
      Tensor<T> dn2 = relu_backward(cache.n2, dC_int);
      if (cfg.shared_norm && cfg.needs_g1())
        dC2_raw = norm_backward(p.norm_c1, cache.nc2, dn2, &grads.gamma_c1, &grads.beta_c1);
      else
        dC2_raw = norm_backward(p.norm_c2, cache.nc2, dn2, &grads.gamma_c2, &grads.beta_c2);
    }
  }

  // Encoder backward -> dPf.
  Tensor<T> dPf = Tensor<T>::zeros_like(cache.Pf);
  if (cfg.has_E2()) {
    if (dC_raw.numel()) matmul_last_backward(cache.Pf, p.E, dC_raw, &dPf, &grads.E);
    if (dC2_raw.numel()) matmul_last_backward(cache.Pf, p.E2, dC2_raw, &dPf, &grads.E2);
  } else {
    Tensor<T> total;
    if (dC_raw.numel()) total = dC_raw;
    if (dC2_raw.numel()) {
      if (total.numel())
        for (std::size_t i = 0; i < total.numel(); ++i) total.data[i] += dC2_raw.data[i];
      else
        total = dC2_raw;
    }
    if (total.numel()) matmul_last_backward(cache.Pf, p.E, total, &dPf, &grads.E);
  }

  // Pool backward adds the gate path's contribution to dX.
  auto pooled = cfg.pooled_or_default();
  std::vector<std::size_t> pooled2 = pooled;
  if (pooled2.size() == 1) pooled2.push_back(1);
  Tensor<T> dP = dPf.reshaped({b, c, pooled2[0], pooled2[1]});
  Tensor<T> dXpool = adaptive_pool_backward(dP, cache.X.shape, pooled2, cfg.pool_kind,
                                            cfg.pool_kind == PoolKind::max ? &cache.pool_argmax
                                                                           : nullptr);
  for (std::size_t i = 0; i < dX.numel(); ++i) dX.data[i] += dXpool.data[i];

  return rank == 1 ? dX.reshaped(cache.input_shape) : dX;
}

// ---------------------------------------------------------------------------
// Sequence variant: gating for shared-weight grouped 1D convolution (H heads
// of kernel length k, channel interaction removed, input pooled to length 3k).
// ---------------------------------------------------------------------------

template <typename T>
struct CgcSeqCache {
  Tensor<T> S;       // (b,c,L)
  Tensor<T> A;       // head means (b,H,L)
  Tensor<T> Apad;    // (b,H,Lp), Lp = max(L, 3k)
  Tensor<T> P;       // (b,H,3k)
  Tensor<T> C_raw;   // (b,H,d)
  NormCache<T> nc;
  Tensor<T> n1, C_dec;
  Tensor<T> G1p, G;  // (b,H,k)
  Tensor<T> What;    // (b,H,k)
};

template <typename T>
Tensor<T> cgc_seq_forward(const Tensor<T>& S, const CgcConfig& cfg, CgcParams<T>& p,
                          CgcSeqCache<T>* cache_out = nullptr) {
  cfg.validate();
  if (cfg.variant != CgcVariant::sequence)
    throw std::invalid_argument("cgc_seq_forward: config is not the sequence variant");
  if (S.rank() != 3)
    throw std::invalid_argument("cgc_seq_forward: input must be (batch, channels, length)");
  const std::size_t b = S.shape[0], c = S.shape[1], L = S.shape[2];
  if (L == 0) throw std::invalid_argument("cgc_seq_forward: empty sequence");
  if (c != cfg.in_channels)
    throw std::invalid_argument("cgc_seq_forward: channel axis " + std::to_string(c) +
                                " != configured " + std::to_string(cfg.in_channels));
  const std::size_t H = cfg.heads;
  const std::size_t k = cfg.kernel[0];
  const std::size_t m = 3 * k;
  const std::size_t per_head = c / H;

  CgcSeqCache<T> local;
  CgcSeqCache<T>& cache = cache_out ? *cache_out : local;
  cache.S = S;

  // Fold channels into head groups by averaging.
  cache.A = Tensor<T>({b, H, L});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t t = 0; t < L; ++t) {
        T acc = T(0);
        for (std::size_t j = 0; j < per_head; ++j)
          acc += S.data[(bi * c + h * per_head + j) * L + t];
        cache.A.data[(bi * H + h) * L + t] = acc / static_cast<T>(per_head);
      }

  // Zero-pad short sequences to the pooled length, then resize to 3k.
  const std::size_t Lp = std::max(L, m);
  cache.Apad = Tensor<T>({b, H, Lp});
  for (std::size_t r = 0; r < b * H; ++r)
    std::copy(cache.A.data.begin() + r * L, cache.A.data.begin() + (r + 1) * L,
              cache.Apad.data.begin() + r * Lp);
  cache.P = adaptive_pool(cache.Apad, {m}, PoolKind::avg);

  cache.C_raw = matmul_last(cache.P, p.E);  // (b,H,d)
  cache.n1 = norm_forward(p.norm_c1, cache.C_raw, Mode::train, &cache.nc);
  cache.C_dec = relu(cache.n1);
  cache.G1p = matmul_last(cache.C_dec, p.D_c);  // (b,H,k)
  cache.G = sigmoid(cache.G1p);

  cache.What = Tensor<T>({b, H, k});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < H * k; ++i)
      cache.What.data[bi * H * k + i] = p.W.data[i] * cache.G.data[bi * H * k + i];

  // Depthwise application: every channel of head h is convolved with the
  // sample's gated kernel row h, same-length output via (k-1)/2 padding.
  const std::size_t pad = (k - 1) / 2;
  Tensor<T> Y({b, c, L});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* kern = cache.What.ptr() + (bi * H + ch / per_head) * k;
      const T* x = S.ptr() + (bi * c + ch) * L;
      T* y = Y.ptr() + (bi * c + ch) * L;
      for (std::size_t t = 0; t < L; ++t) {
        T acc = T(0);
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
          acc += x[src] * kern[j];
        }
        y[t] = acc;
      }
    }
  return Y;
}

template <typename T>
Tensor<T> cgc_seq_backward(const Tensor<T>& dY, const CgcConfig& cfg, CgcParams<T>& p,
                           CgcSeqCache<T>& cache, CgcGrads<T>& grads) {
  const std::size_t b = cache.S.shape[0], c = cache.S.shape[1], L = cache.S.shape[2];
  const std::size_t H = cfg.heads;
  const std::size_t k = cfg.kernel[0];
  const std::size_t m = 3 * k;
  const std::size_t per_head = c / H;
  const std::size_t pad = (k - 1) / 2;
  require_shape(dY, cache.S.shape, "cgc_seq_backward upstream");

  Tensor<T> dS = Tensor<T>::zeros_like(cache.S);
  Tensor<T> dWhat({b, H, k});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t h = ch / per_head;
      const T* kern = cache.What.ptr() + (bi * H + h) * k;
      const T* x = cache.S.ptr() + (bi * c + ch) * L;
      const T* dy = dY.ptr() + (bi * c + ch) * L;
      T* dx = dS.ptr() + (bi * c + ch) * L;
      T* dk = dWhat.ptr() + (bi * H + h) * k;
      for (std::size_t t = 0; t < L; ++t) {
        const T up = dy[t];
        if (up == T(0)) continue;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
          dx[src] += up * kern[j];
          dk[j] += up * x[src];
        }
      }
    }

  Tensor<T> dG({b, H, k});
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < H * k; ++i) {
      grads.W.data[i] += dWhat.data[bi * H * k + i] * cache.G.data[bi * H * k + i];
      dG.data[bi * H * k + i] = dWhat.data[bi * H * k + i] * p.W.data[i];
    }

  Tensor<T> dG1p = sigmoid_backward(cache.G, dG);
  Tensor<T> dC_dec = Tensor<T>::zeros_like(cache.C_dec);
  matmul_last_backward(cache.C_dec, p.D_c, dG1p, &dC_dec, &grads.D_c);
  Tensor<T> dn1 = relu_backward(cache.n1, dC_dec);
  Tensor<T> dC_raw = norm_backward(p.norm_c1, cache.nc, dn1, &grads.gamma_c1, &grads.beta_c1);
  Tensor<T> dP = Tensor<T>::zeros_like(cache.P);
  matmul_last_backward(cache.P, p.E, dC_raw, &dP, &grads.E);

  const std::size_t Lp = cache.Apad.shape[2];
  Tensor<T> dApad = adaptive_pool_backward(dP, {b, H, Lp}, {m}, PoolKind::avg);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t t = 0; t < L; ++t) {
        const T g = dApad.data[(bi * H + h) * Lp + t] / static_cast<T>(per_head);
        for (std::size_t j = 0; j < per_head; ++j)
          dS.data[(bi * c + h * per_head + j) * L + t] += g;
      }
  return dS;
}

}  // namespace cgc
