#pragma once

// Deformable convolution with learned fractional tap offsets, the linear
// interpolation sampler it relies on, and position-sensitive RoI pooling.

#include <cstddef>
#include <span>
#include <vector>

#include "dpngan/layers.hpp"
#include "dpngan/tensor.hpp"

namespace dpngan {

// Tap displacements around the window centre: {-k/2, ..., k/2} for odd k,
// {-k/2, ..., k/2 - 1} for even k.
std::vector<long> conv_grid(std::size_t kernel);

// sum_q max(0, 1 - |q - p|) x[q]; positions outside [-1, L] give 0.
double linear_sample(std::span<const double> x, double p);

// Differentiable sampler: x [L], positions [n] -> [n]. Gradients flow to both
// the samples and the positions.
Tensor linear_sample(const Tensor& x, const Tensor& positions);

// Core 1D deformable convolution with an explicit offset field.
//   x [C_in, L], offsets [k, L_out], w [C_out, C_in, k], bias [C_out] or undefined.
// Tap j of output t reads x at t*stride - padding + j*dilation + offsets[j, t];
// offsets are shared across input channels. Zero offsets reproduce conv1d.
Tensor deform_conv1d(const Tensor& x, const Tensor& offsets, const Tensor& w, const Tensor& bias,
                     const Conv1dOptions& opt = {});

// Core 2D deformable convolution. offsets [2*kH*kW, H_out, W_out] holds
// (dy, dx) per tap in row-major tap order; sampling is bilinear.
Tensor deform_conv2d(const Tensor& x, const Tensor& offsets, const Tensor& w, const Tensor& bias,
                     const Conv2dOptions& opt = {});

// Weights of a deformable layer, including the offset-producing convolution
// that runs over the same input with identical kernel geometry.
struct DeformConvWeights {
  Tensor weight;         // [C_out, C_in, k] or [C_out, C_in, kH, kW]
  Tensor bias;           // [C_out] or undefined
  Tensor offset_weight;  // [k, C_in, k] or [2*kH*kW, C_in, kH, kW]
  Tensor offset_bias;    // [k] or [2*kH*kW]
};

Tensor deform_conv1d(const Tensor& x, const DeformConvWeights& weights, const Conv1dOptions& opt = {});
Tensor deform_conv2d(const Tensor& x, const DeformConvWeights& weights, const Conv2dOptions& opt = {});

// Bin i of a region [start, start+length) split into `bins` parts covers
// [start + floor(i*length/bins), start + floor((i+1)*length/bins)).
struct BinRange {
  std::size_t begin = 0, end = 0;
};
BinRange psroi_bin(std::size_t start, std::size_t length, std::size_t bins, std::size_t i);

// x [C, L] -> [C/K, K]. Bin i averages channel group i (channels
// i*(C/K) .. i*(C/K) + C/K - 1) over its positions.
Tensor psroi_pool1d(const Tensor& x, std::size_t roi_start, std::size_t roi_length, std::size_t bins);

struct Roi2d {
  std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
};

// x [C, H, W] -> [C/K^2, K, K]. Bin (i, j) averages channel group i*K + j.
Tensor psroi_pool2d(const Tensor& x, const Roi2d& roi, std::size_t bins);

// Proposal-free layer: pool over the whole extent, then broadcast each bin
// back over the positions it covers. [C, L] -> [C/K, L]; [C, H, W] with K x K
// bins -> [C/K^2, H, W].
Tensor psroi_layer(const Tensor& x, std::size_t bins);

}  // namespace dpngan
