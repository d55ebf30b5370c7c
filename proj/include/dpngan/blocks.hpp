#pragma once

// Convolution block shared by the generator and both discriminator branches:
//   (deformable) convolution -> position-sensitive pooling -> layer norm over
//   channels -> activation.
// With pooling enabled the convolution emits out_channels * K (1D) or
// out_channels * K^2 (2D) channels, which the pooling layer folds back.

#include <cstddef>
#include <string>

#include "dpngan/activations.hpp"
#include "dpngan/parameter.hpp"

namespace dpngan {

struct BlockSpec {
  std::size_t dims = 1;  // 1: x [C, L]; 2: x [C, H, W] with (kernel x 1) taps
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;  // odd; "same" zero padding along time
  std::size_t stride = 1;  // along time
  std::size_t psroi_bins = 4;
  bool deform = true;
  bool psroi = true;
  ActivationKind activation = ActivationKind::prak;
};

// Registers per-channel activation parameters under `prefix` (.delta, .sigma).
ActivationSite make_activation(ParameterSet& params, const std::string& prefix, ActivationKind kind,
                               std::size_t channels);

// Uniform(+-1/sqrt(fan_in)) initialisation used for every weight and bias.
double init_bound(std::size_t fan_in);

class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(ParameterSet& params, const std::string& prefix, const BlockSpec& spec, Rng& rng);

  Tensor forward(const Tensor& x) const;
  const BlockSpec& spec() const { return spec_; }
  // Time extent after the block.
  std::size_t output_length(std::size_t length) const;

 private:
  BlockSpec spec_;
  Tensor weight_, bias_, offset_weight_, offset_bias_;
  Tensor norm_gain_, norm_bias_;
  ActivationSite act_;
};

}  // namespace dpngan
