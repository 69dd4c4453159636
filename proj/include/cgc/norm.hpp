#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgc/tensor.hpp"

namespace cgc {

enum class Mode { train, eval };

enum class NormKind {
  batch_channel,   // statistics per channel (axis 1) over batch and all trailing axes
  layer_trailing,  // statistics per leading row over the trailing axis
};

/// Affine normalization: (x - mean) / sqrt(var + eps) * gamma + beta.
/// batch_channel keeps running statistics updated by exponential moving
/// average in train mode and consumed in eval mode; layer_trailing always
/// uses per-row statistics.
template <typename T>
struct AffineNorm {
  NormKind kind = NormKind::batch_channel;
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  bool stats_initialized = false;
  T eps = T(1e-5);
  T momentum = T(0.1);

  static AffineNorm batch(std::size_t channels, T eps = T(1e-5)) {
    AffineNorm n;
    n.kind = NormKind::batch_channel;
    n.gamma = Tensor<T>({channels}, T(1));
    n.beta = Tensor<T>({channels}, T(0));
    n.running_mean = Tensor<T>({channels}, T(0));
    n.running_var = Tensor<T>({channels}, T(1));
    n.eps = eps;
    return n;
  }

  static AffineNorm layer(std::size_t width, T eps = T(1e-5)) {
    AffineNorm n;
    n.kind = NormKind::layer_trailing;
    n.gamma = Tensor<T>({width}, T(1));
    n.beta = Tensor<T>({width}, T(0));
    n.eps = eps;
    return n;
  }

  std::size_t width() const { return gamma.numel(); }
};

template <typename T>
struct NormCache {
  Tensor<T> x;
  Tensor<T> xhat;
  std::vector<T> inv_std;  // per channel (batch) or per row (layer)
  Mode mode = Mode::train;
};

namespace detail {

// batch_channel layout view: (outer=b, channel, inner=spatial...), so element
// (bi, ch, r) lives at ((bi * C) + ch) * inner + r.
template <typename T>
void batch_extents(const Tensor<T>& X, std::size_t channels, std::size_t* outer,
                   std::size_t* inner) {
  if (X.rank() < 2)
    throw std::invalid_argument("affine_norm: batch_channel input must have a channel axis");
  if (X.shape[1] != channels)
    throw std::invalid_argument("affine_norm: channel axis " + std::to_string(X.shape[1]) +
                                " does not match affine width " + std::to_string(channels));
  *outer = X.shape[0];
  *inner = X.numel() / (X.shape[0] * channels);
}

}  // namespace detail

template <typename T>
Tensor<T> norm_forward(AffineNorm<T>& nm, const Tensor<T>& X, Mode mode,
                       NormCache<T>* cache = nullptr) {
  if (nm.eps <= T(0)) throw std::invalid_argument("affine_norm: eps must be positive");
  Tensor<T> Y = Tensor<T>::zeros_like(X);
  if (nm.kind == NormKind::batch_channel) {
    const std::size_t C = nm.width();
    std::size_t B = 0, R = 0;
    detail::batch_extents(X, C, &B, &R);
    const std::size_t N = B * R;
    if (mode == Mode::eval && !nm.stats_initialized)
      throw std::runtime_error("affine_norm: eval mode with uninitialized running statistics");
    std::vector<T> mean(C, T(0)), var(C, T(0)), inv_std(C, T(0));
    if (mode == Mode::train) {
      for (std::size_t ch = 0; ch < C; ++ch) {
        T sum = T(0);
        for (std::size_t b = 0; b < B; ++b) {
          const T* p = X.ptr() + (b * C + ch) * R;
          for (std::size_t r = 0; r < R; ++r) sum += p[r];
        }
        mean[ch] = sum / static_cast<T>(N);
        T sq = T(0);
        for (std::size_t b = 0; b < B; ++b) {
          const T* p = X.ptr() + (b * C + ch) * R;
          for (std::size_t r = 0; r < R; ++r) {
            const T d = p[r] - mean[ch];
            sq += d * d;
          }
        }
        var[ch] = sq / static_cast<T>(N);
        // EMA update; the running variance stores the unbiased estimate.
        const T unbiased = N > 1 ? var[ch] * static_cast<T>(N) / static_cast<T>(N - 1) : var[ch];
        nm.running_mean.data[ch] = (T(1) - nm.momentum) * nm.running_mean.data[ch] + nm.momentum * mean[ch];
        nm.running_var.data[ch] = (T(1) - nm.momentum) * nm.running_var.data[ch] + nm.momentum * unbiased;
      }
      nm.stats_initialized = true;
    } else {
      for (std::size_t ch = 0; ch < C; ++ch) {
        mean[ch] = nm.running_mean.data[ch];
        var[ch] = nm.running_var.data[ch];
      }
    }
    for (std::size_t ch = 0; ch < C; ++ch) inv_std[ch] = T(1) / std::sqrt(var[ch] + nm.eps);
    Tensor<T> xhat = Tensor<T>::zeros_like(X);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const T* p = X.ptr() + (b * C + ch) * R;
        T* xh = xhat.ptr() + (b * C + ch) * R;
        T* y = Y.ptr() + (b * C + ch) * R;
        for (std::size_t r = 0; r < R; ++r) {
          xh[r] = (p[r] - mean[ch]) * inv_std[ch];
          y[r] = xh[r] * nm.gamma.data[ch] + nm.beta.data[ch];
        }
      }
    if (cache) {
      cache->x = X;
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->mode = mode;
    }
    return Y;
  }

  // layer_trailing: per-row statistics over the trailing axis.
  const std::size_t D = nm.width();
  if (X.shape.empty() || X.shape.back() != D)
    throw std::invalid_argument("affine_norm: trailing axis " +
                                std::to_string(X.shape.empty() ? 0 : X.shape.back()) +
                                " does not match affine width " + std::to_string(D));
  const std::size_t rows = X.numel() / D;
  std::vector<T> inv_std(rows, T(0));
  Tensor<T> xhat = Tensor<T>::zeros_like(X);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = X.ptr() + r * D;
    T sum = T(0);
    for (std::size_t d = 0; d < D; ++d) sum += p[d];
    const T mean = sum / static_cast<T>(D);
    T sq = T(0);
    for (std::size_t d = 0; d < D; ++d) {
      const T dv = p[d] - mean;
      sq += dv * dv;
    }
    const T var = sq / static_cast<T>(D);
    inv_std[r] = T(1) / std::sqrt(var + nm.eps);
    T* xh = xhat.ptr() + r * D;
    T* y = Y.ptr() + r * D;
    for (std::size_t d = 0; d < D; ++d) {
      xh[d] = (p[d] - mean) * inv_std[r];
      y[d] = xh[d] * nm.gamma.data[d] + nm.beta.data[d];
    }
  }
  if (cache) {
    cache->x = X;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return Y;
}

/// VJP. Train-mode batch statistics are part of the differentiated function;
/// eval mode treats the running statistics as constants.
template <typename T>
Tensor<T> norm_backward(const AffineNorm<T>& nm, const NormCache<T>& cache, const Tensor<T>& dY,
                        Tensor<T>* dgamma, Tensor<T>* dbeta) {
  require_shape(dY, cache.x.shape, "norm_backward upstream");
  Tensor<T> dX = Tensor<T>::zeros_like(cache.x);
  if (nm.kind == NormKind::batch_channel) {
    const std::size_t C = nm.width();
    std::size_t B = 0, R = 0;
    detail::batch_extents(cache.x, C, &B, &R);
    const std::size_t N = B * R;
    for (std::size_t ch = 0; ch < C; ++ch) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (std::size_t b = 0; b < B; ++b) {
        const T* dy = dY.ptr() + (b * C + ch) * R;
        const T* xh = cache.xhat.ptr() + (b * C + ch) * R;
        for (std::size_t r = 0; r < R; ++r) {
          sum_dy += dy[r];
          sum_dy_xhat += dy[r] * xh[r];
        }
      }
      if (dgamma) dgamma->data[ch] += sum_dy_xhat;
      if (dbeta) dbeta->data[ch] += sum_dy;
      const T scale = nm.gamma.data[ch] * cache.inv_std[ch];
      const T mean_dy = sum_dy / static_cast<T>(N);
      const T mean_dy_xhat = sum_dy_xhat / static_cast<T>(N);
      for (std::size_t b = 0; b < B; ++b) {
        const T* dy = dY.ptr() + (b * C + ch) * R;
        const T* xh = cache.xhat.ptr() + (b * C + ch) * R;
        T* dx = dX.ptr() + (b * C + ch) * R;
        for (std::size_t r = 0; r < R; ++r) {
          if (cache.mode == Mode::train)
            dx[r] = scale * (dy[r] - mean_dy - xh[r] * mean_dy_xhat);
          else
            dx[r] = scale * dy[r];
        }
      }
    }
    return dX;
  }

  const std::size_t D = nm.width();
  const std::size_t rows = cache.x.numel() / D;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* dy = dY.ptr() + r * D;
    const T* xh = cache.xhat.ptr() + r * D;
    T* dx = dX.ptr() + r * D;
    T sum_gdy = T(0), sum_gdy_xhat = T(0);
    for (std::size_t d = 0; d < D; ++d) {
      const T g = dy[d] * nm.gamma.data[d];
      sum_gdy += g;
      sum_gdy_xhat += g * xh[d];
      if (dgamma) dgamma->data[d] += dy[d] * xh[d];
      if (dbeta) dbeta->data[d] += dy[d];
    }
    const T mean_gdy = sum_gdy / static_cast<T>(D);
    const T mean_gdy_xhat = sum_gdy_xhat / static_cast<T>(D);
    for (std::size_t d = 0; d < D; ++d)
      dx[d] = cache.inv_std[r] * (dy[d] * nm.gamma.data[d] - mean_gdy - xh[d] * mean_gdy_xhat);
  }
  return dX;
}

}  // namespace cgc
