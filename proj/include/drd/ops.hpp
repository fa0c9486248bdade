#pragma once

// Differentiable tensor operations. Shapes follow (batch, channels, height,
// width) for feature maps and (rows, cols) for matrices.

#include <cstddef>
#include <span>

#include "drd/tensor.hpp"

namespace drd::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor sqrt(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// (B, ...) -> (B)
Tensor sum_per_sample(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
// (B, ...) -> (B, prod(...))
Tensor flatten(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x (B, in), weight (out, in), bias (out) or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x (B, C, H, W), weight (O, C, k, k), bias (O) or undefined; square kernel.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Bilinear interpolation with half-pixel centres (align_corners = false).
// Returns the input itself when the size is unchanged.
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

// (B, C, H, W) -> (B, C)
Tensor global_avg_pool(const Tensor& x);

// Each sample rescaled to zero mean and unit variance over all of its
// entries (group norm with one group, no affine part).
Tensor normalize_per_sample(const Tensor& x, double eps = 1e-5);

// Log-softmax across axis 1 of a rank >= 2 tensor.
Tensor log_softmax(const Tensor& x);
Tensor softmax(const Tensor& x);

// (B, C) log-probabilities -> (B) entries at labels.
Tensor pick(const Tensor& x, std::span<const int> labels);

// (B, C, H, W) -> (B, H, W) slice of one channel.
Tensor select_channel(const Tensor& x, std::size_t channel);

Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace drd::ops
