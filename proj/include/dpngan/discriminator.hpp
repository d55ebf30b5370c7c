#pragma once

// Two-branch waveform discriminator.
//
// Multi-scale branch: average pool, then residual blocks that run every
// kernel size in parallel and concatenate on channels; the last block uses the
// final stride. Multi-channel branch: for each period p the waveform is folded
// into [ceil(T/p), p] (reflect-padded tail) and passed through 2D residual
// blocks with (k x 1) kernels. Each sub-discriminator ends in dense ->
// activation; the concatenated features feed one dense(2) -> sigmoid head
// whose first node is the real score.

#include <cstdint>
#include <vector>

#include "dpngan/blocks.hpp"
#include "dpngan/config.hpp"
#include "dpngan/parameter.hpp"

namespace dpngan {

// [T] -> [1, ceil(T/p), p], row-major, tail reflect-padded.
Tensor reshape_period(const Tensor& waveform, std::size_t period);

struct DiscriminatorOutput {
  Tensor score;             // scalar in [0, 1]
  std::vector<Tensor> taps; // multi-scale block outputs, then per period per block
  Tensor msd_score;         // branch scores, defined only with split heads
  Tensor mcd_score;
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, std::size_t input_length, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::size_t input_length() const { return input_length_; }

  DiscriminatorOutput forward(const Tensor& waveform) const;
  std::size_t tap_count() const;

 private:
  struct ResidualBlock {
    std::vector<ConvBlock> branches;
    Tensor projection;  // 1x1 conv when channels or stride change, else undefined
    std::size_t stride = 1;
  };
  struct SubDiscriminator {
    std::vector<ResidualBlock> blocks;
    Tensor fc_weight, fc_bias;
    ActivationSite act;
    std::size_t period = 0;  // 0 for the multi-scale branch
  };

  SubDiscriminator build(const std::string& prefix, std::size_t dims, std::size_t period, std::size_t length,
                         std::size_t width, Rng& rng);
  Tensor run(const SubDiscriminator& sub, Tensor x, std::vector<Tensor>& taps) const;

  DiscriminatorConfig config_;
  std::size_t input_length_;
  ParameterSet params_;
  std::vector<SubDiscriminator> subs_;  // multi-scale first, then one per period
  Tensor head_weight_, head_bias_;
  Tensor msd_head_weight_, msd_head_bias_, mcd_head_weight_, mcd_head_bias_;
};

}  // namespace dpngan
