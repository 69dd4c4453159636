#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgc/tensor.hpp"

namespace cgc {

/// A differentiable operation packaged for checking: a forward map over a
/// tensor tuple and the matching vector-Jacobian product.
template <typename T>
struct DualOp {
  std::function<Tensor<T>(const std::vector<Tensor<T>>&)> forward;
  std::function<std::vector<Tensor<T>>(const std::vector<Tensor<T>>&, const Tensor<T>&)> vjp;
};

/// Compares the vjp against central finite differences of a random scalar
/// projection of the output. Returns the maximum relative error over all
/// input elements, where each input tensor's errors are scaled by
/// max(1, inf-norm of its analytic and numeric gradients).
template <typename T>
double gradcheck(const DualOp<T>& op, const std::vector<Tensor<T>>& inputs, double eps,
                 std::uint64_t seed = 1) {
  static_assert(sizeof(T) == 8, "gradcheck requires 64-bit inputs");
  if (eps < 1e-7 || eps > 1e-4)
    throw std::invalid_argument("gradcheck: eps must lie in [1e-7, 1e-4]");

  Tensor<T> y0 = op.forward(inputs);
  require_finite(y0, "gradcheck forward");
  Rng rng(seed);
  Tensor<T> projection(y0.shape);
  rng.fill_normal(projection, 0.0, 1.0);

  const std::vector<Tensor<T>> analytic = op.vjp(inputs, projection);
  if (analytic.size() != inputs.size())
    throw std::invalid_argument("gradcheck: vjp returned " + std::to_string(analytic.size()) +
                                " gradients for " + std::to_string(inputs.size()) + " inputs");

  double max_err = 0.0;
  std::vector<Tensor<T>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    require_shape(analytic[i], inputs[i].shape, "gradcheck analytic gradient");
    Tensor<T> numeric(inputs[i].shape);
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      const T saved = probe[i].data[j];
      probe[i].data[j] = saved + static_cast<T>(eps);
      Tensor<T> yp = op.forward(probe);
      probe[i].data[j] = saved - static_cast<T>(eps);
      Tensor<T> ym = op.forward(probe);
      probe[i].data[j] = saved;
      require_finite(yp, "gradcheck probe");
      require_finite(ym, "gradcheck probe");
      double fp = 0.0, fm = 0.0;
      for (std::size_t n = 0; n < yp.numel(); ++n) {
        fp += static_cast<double>(projection.data[n]) * static_cast<double>(yp.data[n]);
        fm += static_cast<double>(projection.data[n]) * static_cast<double>(ym.data[n]);
      }
      numeric.data[j] = static_cast<T>((fp - fm) / (2.0 * eps));
    }
    double scale = 1.0;
    for (std::size_t j = 0; j < numeric.numel(); ++j) {
      scale = std::max(scale, std::abs(static_cast<double>(analytic[i].data[j])));
      scale = std::max(scale, std::abs(static_cast<double>(numeric.data[j])));
    }
    for (std::size_t j = 0; j < numeric.numel(); ++j) {
      const double diff =
          std::abs(static_cast<double>(analytic[i].data[j]) - static_cast<double>(numeric.data[j]));
      max_err = std::max(max_err, diff / scale);
    }
  }
  return max_err;
}

}  // namespace cgc
