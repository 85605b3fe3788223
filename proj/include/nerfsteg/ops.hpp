#pragma once

// Differentiable primitives. All ops are templated on the scalar type and
// instantiated for float (training) and double (gradient checking).
// Shape errors raise DimensionError.

#include <cstddef>

#include "nerfsteg/tensor.hpp"

namespace nerfsteg {

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
/// Numerically stable logistic function.
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

/// Same data, new shape with equal element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

/// Row-wise concatenation of two matrices: [B x N] ++ [B x M] -> [B x (N+M)].
template <typename T>
BasicTensor<T> concat_cols(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// out[i] = sum_j W[i][j] * x[j] + b[i]; x is [N], W is [M x N], b is [M].
template <typename T>
BasicTensor<T> affine(const BasicTensor<T>& x, const BasicTensor<T>& W, const BasicTensor<T>& b);

/// Batched affine map: X [B x N], W [M x N], b [M] -> [B x M].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& X, const BasicTensor<T>& W, const BasicTensor<T>& b);

/// Cross-correlation of a [C_in x H x W] input with [C_out x C_in x K x K]
/// kernels. Output is [C_out x H' x W'], H' = (H + 2*padding - K)/stride + 1.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernels, const BasicTensor<T>& bias,
                      std::size_t stride = 1, std::size_t padding = 0);

/// Floor-mode max pooling over [C x H x W]. Gradient goes to the first
/// maximum (row-major) of each window.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t k, std::size_t stride);

/// (1/numel) * sum (pred - target)^2.
template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

constexpr std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding) {
  return (in + 2 * padding - k) / stride + 1;
}

constexpr std::size_t pool_out_size(std::size_t in, std::size_t k, std::size_t stride) {
  return (in - k) / stride + 1;
}

}  // namespace nerfsteg
