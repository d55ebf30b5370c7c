#include "dpngan/blocks.hpp"

#include <cmath>

#include "dpngan/deform.hpp"
#include "dpngan/dsp.hpp"
#include "dpngan/error.hpp"
#include "dpngan/layers.hpp"

namespace dpngan {

ActivationSite make_activation(ParameterSet& params, const std::string& prefix, ActivationKind kind,
                               std::size_t channels) {
  ActivationSite site;
  site.kind = kind;
  if (has_shift(kind)) site.delta = params.add(prefix + ".delta", Shape{channels}, kPi / 4.0);
  // softplus(log(e - 1)) = 1
  if (has_bandwidth(kind)) site.sigma_raw = params.add(prefix + ".sigma", Shape{1}, std::log(std::exp(1.0) - 1.0));
  return site;
}

double init_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

ConvBlock::ConvBlock(ParameterSet& params, const std::string& prefix, const BlockSpec& spec, Rng& rng) : spec_(spec) {
  if (spec.dims != 1 && spec.dims != 2) throw ValueError("ConvBlock: dims must be 1 or 2");
  if (spec.kernel == 0 || spec.kernel % 2 == 0) throw ValueError("ConvBlock: kernel must be odd");
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.stride == 0 || spec.psroi_bins == 0) {
    throw ValueError("ConvBlock: extents must be positive");
  }
  const std::size_t groups = spec.psroi ? (spec.dims == 1 ? spec.psroi_bins : spec.psroi_bins * spec.psroi_bins) : 1;
  const std::size_t conv_out = spec.out_channels * groups;
  const std::size_t k = spec.kernel;
  const double bound = init_bound(spec.in_channels * k);
  if (spec.dims == 1) {
    weight_ = params.add_uniform(prefix + ".conv.weight", Shape{conv_out, spec.in_channels, k}, bound, rng);
  } else {
    weight_ = params.add_uniform(prefix + ".conv.weight", Shape{conv_out, spec.in_channels, k, 1}, bound, rng);
  }
  bias_ = params.add_uniform(prefix + ".conv.bias", Shape{conv_out}, bound, rng);
  if (spec.deform) {
    const std::size_t offsets = spec.dims == 1 ? k : 2 * k;
    if (spec.dims == 1) offset_weight_ = params.add(prefix + ".offset.weight", Shape{offsets, spec.in_channels, k});
    else offset_weight_ = params.add(prefix + ".offset.weight", Shape{offsets, spec.in_channels, k, 1});
    offset_bias_ = params.add(prefix + ".offset.bias", Shape{offsets});
  }
  norm_gain_ = params.add(prefix + ".norm.gain", Shape{spec.out_channels}, 1.0);
  norm_bias_ = params.add(prefix + ".norm.bias", Shape{spec.out_channels}, 0.0);
  act_ = make_activation(params, prefix + ".act", spec.activation, spec.out_channels);
}

std::size_t ConvBlock::output_length(std::size_t length) const {
  return conv_output_length(length, spec_.kernel, spec_.stride, 1, (spec_.kernel - 1) / 2);
}

Tensor ConvBlock::forward(const Tensor& x) const {
  const std::size_t pad = (spec_.kernel - 1) / 2;
  Tensor y;
  if (spec_.dims == 1) {
    const Conv1dOptions opt{spec_.stride, 1, pad};
    y = spec_.deform ? deform_conv1d(x, DeformConvWeights{weight_, bias_, offset_weight_, offset_bias_}, opt)
                     : conv1d(x, weight_, bias_, opt);
  } else {
    const Conv2dOptions opt{spec_.stride, 1, pad, 0};
    y = spec_.deform ? deform_conv2d(x, DeformConvWeights{weight_, bias_, offset_weight_, offset_bias_}, opt)
                     : conv2d(x, weight_, bias_, opt);
  }
  if (spec_.psroi) y = psroi_layer(y, spec_.psroi_bins);
  y = layer_norm(y, 0, norm_gain_, norm_bias_);
  return apply_activation(act_, y);
}

}  // namespace dpngan
