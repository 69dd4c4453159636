#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgc/tensor.hpp"

namespace cgc {

// Convolution is cross-correlation (no kernel flip), zero padding only.

struct ConvSpec {
  std::vector<std::size_t> stride;
  std::vector<std::size_t> padding;
  std::size_t groups = 1;
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  const std::size_t padded = in + 2 * pad;
  if (padded < k)
    throw std::invalid_argument("conv_nd: kernel extent " + std::to_string(k) +
                                " exceeds padded input extent " + std::to_string(padded));
  return (padded - k) / stride + 1;
}

namespace detail {

// Normalizes a rank-1 spatial problem to rank 2 by appending a unit axis.
template <typename T>
Tensor<T> with_unit_axis(const Tensor<T>& t) {
  Shape s = t.shape;
  s.push_back(1);
  return t.reshaped(s);
}

inline void check_conv_shapes(const Shape& x, const Shape& w, const ConvSpec& spec) {
  if (x.size() != 4) throw std::invalid_argument("conv_nd: input rank must be spatial rank 1 or 2");
  if (w.size() != 4) throw std::invalid_argument("conv_nd: kernel rank must match input spatial rank");
  const std::size_t c = x[1], o = w[0];
  if (spec.groups == 0) throw std::invalid_argument("conv_nd: groups must be positive");
  if (c % spec.groups != 0)
    throw std::invalid_argument("conv_nd: input channel axis " + std::to_string(c) +
                                " not divisible by groups " + std::to_string(spec.groups));
  if (o % spec.groups != 0)
    throw std::invalid_argument("conv_nd: output channel axis " + std::to_string(o) +
                                " not divisible by groups " + std::to_string(spec.groups));
  if (w[1] != c / spec.groups)
    throw std::invalid_argument("conv_nd: kernel channel axis expects " +
                                std::to_string(c / spec.groups) + " (c/groups), got " +
                                std::to_string(w[1]));
}

}  // namespace detail

/// 2D convolution, NCHW. Y[b,oc,oy,ox] = sum X[b,ic,oy*s-p+ky,ox*s-p+kx] * W[oc,ic',ky,kx].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& X, const Tensor<T>& W, const ConvSpec& spec) {
  detail::check_conv_shapes(X.shape, W.shape, spec);
  const std::size_t b = X.shape[0], c = X.shape[1], h = X.shape[2], w = X.shape[3];
  const std::size_t o = W.shape[0], cg = W.shape[1], k1 = W.shape[2], k2 = W.shape[3];
  const std::size_t s1 = spec.stride[0], s2 = spec.stride[1];
  const std::size_t p1 = spec.padding[0], p2 = spec.padding[1];
  const std::size_t oh = conv_out_extent(h, k1, s1, p1);
  const std::size_t ow = conv_out_extent(w, k2, s2, p2);
  const std::size_t og = o / spec.groups;

  Tensor<T> Y({b, o, oh, ow});
  const T* xp = X.ptr();
  const T* wp = W.ptr();
  T* yp = Y.ptr();
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      const std::size_t g = oc / og;
      const T* wbase = wp + oc * cg * k1 * k2;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = T(0);
          for (std::size_t ic = 0; ic < cg; ++ic) {
            const std::size_t xc = g * cg + ic;
            const T* xbase = xp + ((bi * c + xc) * h) * w;
            const T* wrow = wbase + ic * k1 * k2;
            for (std::size_t ky = 0; ky < k1; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * s1 + ky) - static_cast<std::ptrdiff_t>(p1);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k2; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * s2 + kx) - static_cast<std::ptrdiff_t>(p2);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += xbase[iy * static_cast<std::ptrdiff_t>(w) + ix] * wrow[ky * k2 + kx];
              }
            }
          }
          yp[((bi * o + oc) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
  return Y;
}

/// VJP of conv2d with respect to both operands.
template <typename T>
void conv2d_backward(const Tensor<T>& X, const Tensor<T>& W, const ConvSpec& spec,
                     const Tensor<T>& dY, Tensor<T>* dX, Tensor<T>* dW) {
  detail::check_conv_shapes(X.shape, W.shape, spec);
  const std::size_t b = X.shape[0], c = X.shape[1], h = X.shape[2], w = X.shape[3];
  const std::size_t o = W.shape[0], cg = W.shape[1], k1 = W.shape[2], k2 = W.shape[3];
  const std::size_t s1 = spec.stride[0], s2 = spec.stride[1];
  const std::size_t p1 = spec.padding[0], p2 = spec.padding[1];
  const std::size_t oh = dY.shape[2], ow = dY.shape[3];
  const std::size_t og = o / spec.groups;
  require_shape(dY, {b, o, oh, ow}, "conv2d_backward upstream");

  if (dX) require_shape(*dX, X.shape, "conv2d_backward dX");
  if (dW) require_shape(*dW, W.shape, "conv2d_backward dW");

  const T* xp = X.ptr();
  const T* wp = W.ptr();
  const T* gp = dY.ptr();
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t oc = 0; oc < o; ++oc) {
      const std::size_t g = oc / og;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T up = gp[((bi * o + oc) * oh + oy) * ow + ox];
          if (up == T(0)) continue;
          for (std::size_t ic = 0; ic < cg; ++ic) {
            const std::size_t xc = g * cg + ic;
            for (std::size_t ky = 0; ky < k1; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * s1 + ky) - static_cast<std::ptrdiff_t>(p1);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kx = 0; kx < k2; ++kx) {
                const std::ptrdiff_t ix =
                    static_cast<std::ptrdiff_t>(ox * s2 + kx) - static_cast<std::ptrdiff_t>(p2);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                const std::size_t xoff = ((bi * c + xc) * h + static_cast<std::size_t>(iy)) * w +
                                         static_cast<std::size_t>(ix);
                const std::size_t woff = ((oc * cg + ic) * k1 + ky) * k2 + kx;
                if (dX) dX->data[xoff] += up * wp[woff];
                if (dW) dW->data[woff] += up * xp[xoff];
              }
            }
          }
        }
      }
    }
  }
}

/// Spatial-rank-agnostic entry: accepts (b,c,L) with rank-1 kernels or (b,c,h,w).
template <typename T>
Tensor<T> conv_nd(const Tensor<T>& X, const Tensor<T>& W, ConvSpec spec) {
  if (X.rank() == 3 && W.rank() == 3) {
    spec.stride.push_back(1);
    spec.padding.push_back(0);
    Tensor<T> Y = conv2d(detail::with_unit_axis(X), detail::with_unit_axis(W), spec);
    return Y.reshaped({Y.shape[0], Y.shape[1], Y.shape[2]});
  }
  if (X.rank() == 4 && W.rank() == 4) return conv2d(X, W, spec);
  throw std::invalid_argument("conv_nd: spatial rank must be 1 or 2, input " + shape_str(X.shape) +
                              " kernel " + shape_str(W.shape));
}

template <typename T>
void conv_nd_backward(const Tensor<T>& X, const Tensor<T>& W, ConvSpec spec, const Tensor<T>& dY,
                      Tensor<T>* dX, Tensor<T>* dW) {
  if (X.rank() == 3 && W.rank() == 3) {
    spec.stride.push_back(1);
    spec.padding.push_back(0);
    Tensor<T> dX4, dW4;
    if (dX) dX4 = Tensor<T>({X.shape[0], X.shape[1], X.shape[2], 1});
    if (dW) dW4 = Tensor<T>({W.shape[0], W.shape[1], W.shape[2], 1});
    conv2d_backward(detail::with_unit_axis(X), detail::with_unit_axis(W), spec,
                    detail::with_unit_axis(dY), dX ? &dX4 : nullptr, dW ? &dW4 : nullptr);
    if (dX)
      for (std::size_t i = 0; i < dX->numel(); ++i) dX->data[i] += dX4.data[i];
    if (dW)
      for (std::size_t i = 0; i < dW->numel(); ++i) dW->data[i] += dW4.data[i];
    return;
  }
  conv2d_backward(X, W, spec, dY, dX, dW);
}

// ---------------------------------------------------------------------------
// Adaptive pooling. Output bin i on an axis of length h covers input indices
// [floor(i*h/h'), ceil((i+1)*h/h')).
// ---------------------------------------------------------------------------

enum class PoolKind { avg, max };

inline std::size_t pool_bin_start(std::size_t i, std::size_t in, std::size_t out) {
  return (i * in) / out;
}
inline std::size_t pool_bin_end(std::size_t i, std::size_t in, std::size_t out) {
  return ((i + 1) * in + out - 1) / out;
}

/// Adaptive pooling over the trailing 1 or 2 spatial axes of (b,c,*spatial).
/// For max pooling, `argmax` (when given) records the flat input index chosen
/// per output element; ties resolve to the first maximum in scan order.
template <typename T>
Tensor<T> adaptive_pool(const Tensor<T>& X, const std::vector<std::size_t>& out_spatial,
                        PoolKind kind, std::vector<std::size_t>* argmax = nullptr) {
  if (X.rank() == 3 && out_spatial.size() == 1) {
    Tensor<T> Y = adaptive_pool(detail::with_unit_axis(X), {out_spatial[0], 1}, kind, argmax);
    return Y.reshaped({Y.shape[0], Y.shape[1], Y.shape[2]});
  }
  if (X.rank() != 4 || out_spatial.size() != 2)
    throw std::invalid_argument("adaptive_pool: spatial rank must be 1 or 2, input " +
                                shape_str(X.shape));
  const std::size_t b = X.shape[0], c = X.shape[1], h = X.shape[2], w = X.shape[3];
  const std::size_t oh = out_spatial[0], ow = out_spatial[1];
  if (oh == 0 || ow == 0)
    throw std::invalid_argument("adaptive_pool: output extents must be positive");

  Tensor<T> Y({b, c, oh, ow});
  if (argmax) argmax->assign(Y.numel(), 0);
  const T* xp = X.ptr();
  T* yp = Y.ptr();
  for (std::size_t bc = 0; bc < b * c; ++bc) {
    const T* plane = xp + bc * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t y0 = pool_bin_start(oy, h, oh), y1 = pool_bin_end(oy, h, oh);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t x0 = pool_bin_start(ox, w, ow), x1 = pool_bin_end(ox, w, ow);
        const std::size_t yoff = (bc * oh + oy) * ow + ox;
        if (kind == PoolKind::avg) {
          T acc = T(0);
          for (std::size_t iy = y0; iy < y1; ++iy)
            for (std::size_t ix = x0; ix < x1; ++ix) acc += plane[iy * w + ix];
          yp[yoff] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
        } else {
          T best = plane[y0 * w + x0];
          std::size_t best_off = y0 * w + x0;
          for (std::size_t iy = y0; iy < y1; ++iy)
            for (std::size_t ix = x0; ix < x1; ++ix) {
              const T v = plane[iy * w + ix];
              if (v > best) {
                best = v;
                best_off = iy * w + ix;
              }
            }
          yp[yoff] = best;
          if (argmax) (*argmax)[yoff] = bc * h * w + best_off;
        }
      }
    }
  }
  return Y;
}

template <typename T>
Tensor<T> adaptive_pool_backward(const Tensor<T>& dY, const Shape& in_shape,
                                 const std::vector<std::size_t>& out_spatial, PoolKind kind,
                                 const std::vector<std::size_t>* argmax = nullptr) {
  if (in_shape.size() == 3 && out_spatial.size() == 1) {
    Shape in4 = in_shape;
    in4.push_back(1);
    Tensor<T> dX = adaptive_pool_backward(detail::with_unit_axis(dY), in4, {out_spatial[0], 1},
                                          kind, argmax);
    return dX.reshaped(in_shape);
  }
  const std::size_t b = in_shape[0], c = in_shape[1], h = in_shape[2], w = in_shape[3];
  const std::size_t oh = out_spatial[0], ow = out_spatial[1];
  require_shape(dY, {b, c, oh, ow}, "adaptive_pool_backward upstream");
  Tensor<T> dX(in_shape);
  const T* gp = dY.ptr();
  T* dp = dX.ptr();
  if (kind == PoolKind::max) {
    if (!argmax) throw std::invalid_argument("adaptive_pool_backward: max pooling needs argmax");
    for (std::size_t i = 0; i < dY.numel(); ++i) dp[(*argmax)[i]] += gp[i];
    return dX;
  }
  for (std::size_t bc = 0; bc < b * c; ++bc) {
    T* plane = dp + bc * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t y0 = pool_bin_start(oy, h, oh), y1 = pool_bin_end(oy, h, oh);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t x0 = pool_bin_start(ox, w, ow), x1 = pool_bin_end(ox, w, ow);
        const T g = gp[(bc * oh + oy) * ow + ox] / static_cast<T>((y1 - y0) * (x1 - x0));
        for (std::size_t iy = y0; iy < y1; ++iy)
          for (std::size_t ix = x0; ix < x1; ++ix) plane[iy * w + ix] += g;
      }
    }
  }
  return dX;
}

// ---------------------------------------------------------------------------
// Grouped linear along the trailing axis. Weight (c/g, o/g) is shared by all
// g groups and all leading indices; no bias.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> grouped_linear(const Tensor<T>& X, const Tensor<T>& Wg, std::size_t g) {
  if (X.rank() == 0) throw std::invalid_argument("grouped_linear: scalar input");
  if (Wg.rank() != 2) throw std::invalid_argument("grouped_linear: weight must be rank 2");
  const std::size_t c = X.shape.back();
  const std::size_t cg = Wg.shape[0], og = Wg.shape[1];
  if (g == 0 || c % g != 0)
    throw std::invalid_argument("grouped_linear: trailing axis " + std::to_string(c) +
                                " not divisible by groups " + std::to_string(g));
  if (cg != c / g)
    throw std::invalid_argument("grouped_linear: weight rows " + std::to_string(cg) +
                                " != c/g = " + std::to_string(c / g));
  const std::size_t o = og * g;
  const std::size_t rows = X.numel() / c;

  Shape out_shape = X.shape;
  out_shape.back() = o;
  Tensor<T> Y(out_shape);
  const T* xp = X.ptr();
  const T* wp = Wg.ptr();
  T* yp = Y.ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xp + r * c;
    T* yr = yp + r * o;
    for (std::size_t gi = 0; gi < g; ++gi) {
      const T* xg = xr + gi * cg;
      T* yg = yr + gi * og;
      for (std::size_t q = 0; q < og; ++q) {
        T acc = T(0);
        for (std::size_t p = 0; p < cg; ++p) acc += xg[p] * wp[p * og + q];
        yg[q] = acc;
      }
    }
  }
  return Y;
}

template <typename T>
void grouped_linear_backward(const Tensor<T>& X, const Tensor<T>& Wg, std::size_t g,
                             const Tensor<T>& dY, Tensor<T>* dX, Tensor<T>* dWg) {
  const std::size_t c = X.shape.back();
  const std::size_t cg = Wg.shape[0], og = Wg.shape[1];
  const std::size_t o = og * g;
  if (dY.shape.back() != o)
    throw std::invalid_argument("grouped_linear_backward: upstream trailing axis " +
                                std::to_string(dY.shape.back()) + " != o = " + std::to_string(o));
  const std::size_t rows = X.numel() / c;
  if (dX) require_shape(*dX, X.shape, "grouped_linear_backward dX");
  if (dWg) require_shape(*dWg, Wg.shape, "grouped_linear_backward dWg");
  const T* xp = X.ptr();
  const T* wp = Wg.ptr();
  const T* gp = dY.ptr();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t gi = 0; gi < g; ++gi) {
      const T* xg = xp + r * c + gi * cg;
      const T* gg = gp + r * o + gi * og;
      for (std::size_t p = 0; p < cg; ++p) {
        T acc = T(0);
        for (std::size_t q = 0; q < og; ++q) {
          acc += gg[q] * wp[p * og + q];
          if (dWg) dWg->data[p * og + q] += xg[p] * gg[q];
        }
        if (dX) dX->data[r * c + gi * cg + p] += acc;
      }
    }
  }
}

/// Dense right-multiply over the trailing axis: (..., m) x (m, n) -> (..., n).
template <typename T>
Tensor<T> matmul_last(const Tensor<T>& X, const Tensor<T>& W) {
  return grouped_linear(X, W, 1);
}

template <typename T>
void matmul_last_backward(const Tensor<T>& X, const Tensor<T>& W, const Tensor<T>& dY,
                          Tensor<T>* dX, Tensor<T>* dW) {
  grouped_linear_backward(X, W, 1, dY, dX, dW);
}

// ---------------------------------------------------------------------------
// Pointwise ops and broadcasting binaries.
// ---------------------------------------------------------------------------

template <typename T>
T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& X) {
  Tensor<T> Y = X;
  for (auto& v : Y.data) v = sigmoid_scalar(v);
  return Y;
}

/// VJP given the forward output y: dy * y * (1 - y).
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& Y, const Tensor<T>& dY) {
  require_shape(dY, Y.shape, "sigmoid_backward upstream");
  Tensor<T> dX = Tensor<T>::zeros_like(Y);
  for (std::size_t i = 0; i < Y.numel(); ++i)
    dX.data[i] = dY.data[i] * Y.data[i] * (T(1) - Y.data[i]);
  return dX;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& X) {
  Tensor<T> Y = X;
  for (auto& v : Y.data) v = v > T(0) ? v : T(0);
  return Y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& X, const Tensor<T>& dY) {
  require_shape(dY, X.shape, "relu_backward upstream");
  Tensor<T> dX = Tensor<T>::zeros_like(X);
  for (std::size_t i = 0; i < X.numel(); ++i) dX.data[i] = X.data[i] > T(0) ? dY.data[i] : T(0);
  return dX;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument("broadcast: incompatible extents " + std::to_string(da) + " vs " +
                                  std::to_string(db) + " on axis " + std::to_string(i));
    out[i] = std::max(da, db);
  }
  return out;
}

namespace detail {

inline std::size_t broadcast_offset(const Shape& out_shape, const Shape& in_shape,
                                    std::size_t out_flat) {
  std::size_t off = 0;
  std::size_t stride = 1;
  const std::size_t skew = out_shape.size() - in_shape.size();
  // Walk axes from the last to the first, accumulating the input offset.
  std::size_t rem = out_flat;
  std::vector<std::size_t> coords(out_shape.size());
  for (std::size_t i = out_shape.size(); i-- > 0;) {
    coords[i] = rem % out_shape[i];
    rem /= out_shape[i];
  }
  for (std::size_t i = in_shape.size(); i-- > 0;) {
    const std::size_t coord = in_shape[i] == 1 ? 0 : coords[i + skew];
    off += coord * stride;
    stride *= in_shape[i];
  }
  return off;
}

}  // namespace detail

template <typename T, typename F>
Tensor<T> broadcast_binary(const Tensor<T>& A, const Tensor<T>& B, F&& f) {
  const Shape out_shape = broadcast_shape(A.shape, B.shape);
  Tensor<T> Y(out_shape);
  for (std::size_t i = 0; i < Y.numel(); ++i) {
    const T a = A.data[detail::broadcast_offset(out_shape, A.shape, i)];
    const T b = B.data[detail::broadcast_offset(out_shape, B.shape, i)];
    Y.data[i] = f(a, b);
  }
  return Y;
}

template <typename T>
Tensor<T> add(const Tensor<T>& A, const Tensor<T>& B) {
  return broadcast_binary(A, B, [](T a, T b) { return a + b; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& A, const Tensor<T>& B) {
  return broadcast_binary(A, B, [](T a, T b) { return a * b; });
}

/// Sums an upstream gradient over the axes a broadcast expanded.
template <typename T>
Tensor<T> broadcast_reduce(const Tensor<T>& dY, const Shape& target) {
  Tensor<T> out(target);
  for (std::size_t i = 0; i < dY.numel(); ++i)
    out.data[detail::broadcast_offset(dY.shape, target, i)] += dY.data[i];
  return out;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy over (batch, classes) logits, mean reduction.
// ---------------------------------------------------------------------------

template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                        Tensor<T>* dlogits = nullptr) {
  if (logits.rank() != 2)
    throw std::invalid_argument("softmax_cross_entropy: logits must be (batch, classes)");
  const std::size_t b = logits.shape[0], k = logits.shape[1];
  if (labels.size() != b)
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch " + std::to_string(b));
  if (dlogits) require_shape(*dlogits, logits.shape, "softmax_cross_entropy dlogits");
  T loss = T(0);
  for (std::size_t i = 0; i < b; ++i) {
    const T* row = logits.ptr() + i * k;
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                  " outside [0," + std::to_string(k) + ")");
    T m = row[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    T z = T(0);
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - m);
    const T logz = std::log(z) + m;
    loss += logz - row[static_cast<std::size_t>(label)];
    if (dlogits) {
      T* drow = dlogits->ptr() + i * k;
      for (std::size_t j = 0; j < k; ++j) {
        const T p = std::exp(row[j] - logz);
        drow[j] += (p - (static_cast<std::size_t>(label) == j ? T(1) : T(0))) / static_cast<T>(b);
      }
    }
  }
  return loss / static_cast<T>(b);
}

template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  const std::size_t k = logits.shape[1];
  const T* p = logits.ptr() + row * k;
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (p[j] > p[best]) best = j;
  return best;
}

}  // namespace cgc
