#pragma once

// Periodic activations built from two phase-shifted triangle waves, the
// kernel-smoothed variant used inside convolution blocks, and the standard
// baselines they are compared against.

#include <string>
#include <string_view>

#include "dpngan/tensor.hpp"

namespace dpngan {

// 2*pi-periodic odd triangle wave with slope +1 through the origin and peaks
// of height pi/2 at pi/2 + 2*pi*m.
double triangle_wave(double u);

// 8/pi^2 * (tri(x + pi/2) + tri(x)).
double periodic_relu(double x);
// 8/pi^2 * (tri(x + delta) + tri(x - delta)).
double ada_prelu(double x, double delta);

Tensor periodic_relu(const Tensor& x);
// delta holds one shift per channel (axis 0 of x).
Tensor ada_prelu(const Tensor& x, const Tensor& delta);

// log(1 + e^x), elementwise.
Tensor softplus(const Tensor& x);

// Gaussian smoothing along time (axis 1) followed by ada_prelu. x is [C, L]
// or [C, L, W]; sigma is a one-element positive tensor.
Tensor prak(const Tensor& x, const Tensor& delta, const Tensor& sigma);

enum class ActivationKind { prak, ada_prelu, periodic_relu, relu, sigmoid, tanh, silu };

ActivationKind parse_activation(std::string_view name);
std::string to_string(ActivationKind kind);
bool has_shift(ActivationKind kind);
bool has_bandwidth(ActivationKind kind);

// relu, sigmoid, tanh or silu; other kinds need parameters and are rejected.
Tensor baseline_activation(ActivationKind kind, const Tensor& x);

// Parameters of one activation site. `delta` is [C] for the shifted kinds;
// `sigma_raw` is the one-element pre-softplus bandwidth for prak.
struct ActivationSite {
  ActivationKind kind = ActivationKind::prak;
  Tensor delta;
  Tensor sigma_raw;
};

Tensor apply_activation(const ActivationSite& site, const Tensor& x);

}  // namespace dpngan
