#pragma once

// Shared helpers for the unit and acceptance tests: seeded random tensors and
// brute-force reference implementations that do not touch the tape.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dpngan/tensor.hpp"

namespace dpngan::testing {

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), random_values(n, seed, lo, hi));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double inner(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct sum over taps with zero padding; x [Ci, L], w [Co, Ci, k].
inline std::vector<double> ref_conv1d(std::span<const double> x, std::size_t ci, std::size_t len,
                                      std::span<const double> w, std::size_t co, std::size_t k,
                                      std::size_t stride, std::size_t dilation, std::size_t padding) {
  const std::size_t out_len = (len + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
  std::vector<double> y(co * out_len, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t t = 0; t < out_len; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long pos = static_cast<long>(t * stride + j * dilation) - static_cast<long>(padding);
          if (pos < 0 || pos >= static_cast<long>(len)) continue;
          s += w[(o * ci + c) * k + j] * x[c * len + static_cast<std::size_t>(pos)];
        }
      y[o * out_len + t] = s;
    }
  return y;
}

// Tent-kernel interpolation at a real position, zero outside the sequence.
inline double ref_sample(std::span<const double> x, double p) {
  double s = 0.0;
  for (std::size_t q = 0; q < x.size(); ++q) s += std::max(0.0, 1.0 - std::abs(static_cast<double>(q) - p)) * x[q];
  return s;
}

// Bilinear product-kernel sample of a [H, W] plane.
inline double ref_sample2d(std::span<const double> x, std::size_t h, std::size_t w, double py, double px) {
  double s = 0.0;
  for (std::size_t qy = 0; qy < h; ++qy)
    for (std::size_t qx = 0; qx < w; ++qx) {
      const double g = std::max(0.0, 1.0 - std::abs(static_cast<double>(qy) - py)) *
                       std::max(0.0, 1.0 - std::abs(static_cast<double>(qx) - px));
      s += g * x[qy * w + qx];
    }
  return s;
}

}  // namespace dpngan::testing
