#include "dpngan/activations.hpp"

#include <cmath>

#include "dpngan/dsp.hpp"
#include "dpngan/error.hpp"

namespace dpngan {
namespace {

constexpr double kScale = 8.0 / (kPi * kPi);

// Index of the half-period segment containing u; tri'(u) = (-1)^n.
long segment(double u) { return static_cast<long>(std::floor(u / kPi + 0.5)); }
double slope(double u) { return (segment(u) % 2 == 0) ? 1.0 : -1.0; }

}  // namespace

double triangle_wave(double u) {
  const long n = segment(u);
  return (u - kPi * static_cast<double>(n)) * (n % 2 == 0 ? 1.0 : -1.0);
}

double periodic_relu(double x) { return kScale * (triangle_wave(x + kPi / 2.0) + triangle_wave(x)); }

double ada_prelu(double x, double delta) { return kScale * (triangle_wave(x + delta) + triangle_wave(x - delta)); }

Tensor periodic_relu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = periodic_relu(xv[i]);
  return record("periodic_relu", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto xv = self.input_value(0);
    auto gx = self.input_grad(0);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += self.grad[i] * kScale * (slope(xv[i] + kPi / 2.0) + slope(xv[i]));
    }
  });
}

Tensor ada_prelu(const Tensor& x, const Tensor& delta) {
  if (x.rank() < 1 || delta.rank() != 1 || delta.numel() != x.extent(0)) {
    throw ShapeError("ada_prelu: need one shift per channel, got x " + shape_str(x.shape()) + " and delta " +
                     shape_str(delta.shape()));
  }
  const std::size_t per_channel = x.numel() / x.extent(0);
  auto xv = x.values(), dv = delta.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = ada_prelu(xv[i], dv[i / per_channel]);
  return record("ada_prelu", x.shape(), std::move(out), {x, delta}, [per_channel](detail::Node& self) {
    auto xv = self.input_value(0), dv = self.input_value(1);
    auto gx = self.input_grad(0), gd = self.input_grad(1);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double d = dv[i / per_channel];
      const double s1 = slope(xv[i] + d), s2 = slope(xv[i] - d);
      if (!gx.empty()) gx[i] += self.grad[i] * kScale * (s1 + s2);
      if (!gd.empty()) gd[i / per_channel] += self.grad[i] * kScale * (s1 - s2);
    }
  });
}

Tensor softplus(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::max(xv[i], 0.0) + std::log1p(std::exp(-std::abs(xv[i])));
  return record("softplus", x.shape(), std::move(out), {x}, [](detail::Node& self) {
    auto xv = self.input_value(0);
    auto gx = self.input_grad(0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] / (1.0 + std::exp(-xv[i]));
  });
}

Tensor prak(const Tensor& x, const Tensor& delta, const Tensor& sigma) {
  return ada_prelu(gaussian_kernel_smooth(x, sigma), delta);
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "prak") return ActivationKind::prak;
  if (name == "ada_prelu") return ActivationKind::ada_prelu;
  if (name == "periodic_relu") return ActivationKind::periodic_relu;
  if (name == "relu") return ActivationKind::relu;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "tanh") return ActivationKind::tanh;
  if (name == "silu") return ActivationKind::silu;
  throw ValueError("unknown activation '" + std::string(name) + "'");
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::prak: return "prak";
    case ActivationKind::ada_prelu: return "ada_prelu";
    case ActivationKind::periodic_relu: return "periodic_relu";
    case ActivationKind::relu: return "relu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::silu: return "silu";
  }
  return "?";
}

bool has_shift(ActivationKind kind) { return kind == ActivationKind::prak || kind == ActivationKind::ada_prelu; }
bool has_bandwidth(ActivationKind kind) { return kind == ActivationKind::prak; }

Tensor baseline_activation(ActivationKind kind, const Tensor& x) {
  switch (kind) {
    case ActivationKind::relu: return relu(x);
    case ActivationKind::sigmoid: return sigmoid(x);
    case ActivationKind::tanh: return tanh(x);
    case ActivationKind::silu: return silu(x);
    default: throw ValueError("baseline_activation: '" + to_string(kind) + "' is not a baseline activation");
  }
}

Tensor apply_activation(const ActivationSite& site, const Tensor& x) {
  switch (site.kind) {
    case ActivationKind::prak: return prak(x, site.delta, softplus(site.sigma_raw));
    case ActivationKind::ada_prelu: return ada_prelu(x, site.delta);
    case ActivationKind::periodic_relu: return periodic_relu(x);
    default: return baseline_activation(site.kind, x);
  }
}

}  // namespace dpngan
