#pragma once

// Standard differentiable layers. Inputs carry no batch axis: a 1D feature
// map is [channels, length], a 2D map is [channels, height, width].
// Padding is always explicit zero padding.

#include <cstddef>

#include "dpngan/tensor.hpp"

namespace dpngan {

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};

struct Conv2dOptions {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t dilation, std::size_t padding);

// x [C_in, L], w [C_out, C_in, k], bias [C_out] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv1dOptions& opt = {});

// x [C_in, H, W], w [C_out, C_in, kH, kW], bias [C_out] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dOptions& opt = {});

// x [C_in, L], w [C_in, C_out, k]; output [C_out, (L-1)*stride + k]. With a
// shared weight array this is the adjoint of conv1d (zero padding).
Tensor transpose_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride);

// x [C, L] -> [C, floor((L-k)/stride)+1], window means.
Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride);

// x [C, H, W] -> window maxima over kernel x kernel windows.
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);

// Normalises along `axis` to zero mean and unit (population) variance, then
// applies per-position gain and bias of extent shape[axis].
Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor& gain, const Tensor& bias,
                  double epsilon = 1e-5);

// x [n], W [m, n], b [m] or undefined -> W x + b.
Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b);

}  // namespace dpngan
