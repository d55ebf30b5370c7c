#pragma once

// Mel + metadata conditioned waveform generator.
//
//   mel [n_mels, T] -> conv2d 3x3 -> max pool 2x2 -> flatten(freq into
//   channels) -> layer norm                                   [F, T/2]
//   metadata [W] -> dense -> activation -> dense, broadcast    [H, T/2]
//   concat -> transpose conv (stride 2), symmetric crop        [C, 2*(T/2)]
//   residual ladder of DPN layers, outputs summed              [C, 2*(T/2)]
//   conv block -> flatten -> dense -> tanh                      [output_length]
//
// A DPN layer is block -> low-pass decimate by 2 -> block -> interpolate by 2
// and high-pass.

#include <cstdint>
#include <vector>

#include "dpngan/blocks.hpp"
#include "dpngan/config.hpp"
#include "dpngan/parameter.hpp"

namespace dpngan {

class Generator {
 public:
  Generator(const GeneratorConfig& config, const AudioConfig& audio, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  const AudioConfig& audio() const { return audio_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  // mel [n_mels, frames] (or [1, n_mels, frames]), meta [meta_width] -> [output_length].
  Tensor forward(const Tensor& mel, const Tensor& meta) const;

  // mel -> [init_channels * n_mels/2, frames/2]
  Tensor mel_initiator(const Tensor& mel) const;
  // meta -> [meta_hidden]; zeros when metadata is disabled.
  Tensor metadata_initiator(const Tensor& meta) const;
  // -> [dpn_channels, 2 * time extent of mel_features]
  Tensor fuse_and_upscale(const Tensor& mel_features, const Tensor& meta_features) const;
  Tensor dpn_layer(std::size_t index, const Tensor& x) const;
  Tensor dpn_module(const Tensor& x) const;
  Tensor output_head(const Tensor& x) const;

  std::size_t sequence_length() const { return sequence_length_; }

 private:
  struct DpnLayer {
    ConvBlock block_a, block_b;
  };
  struct PlainLayer {
    Tensor weight, bias;
    ActivationSite act;
  };

  GeneratorConfig config_;
  AudioConfig audio_;
  ParameterSet params_;
  std::size_t frames_ = 0, sequence_length_ = 0;

  Tensor init_weight_, init_bias_, init_gain_, init_norm_bias_;
  Tensor meta_w1_, meta_b1_, meta_w2_, meta_b2_;
  ActivationSite meta_act_;
  Tensor up_weight_, up_bias_;
  std::vector<DpnLayer> dpn_;
  std::vector<PlainLayer> plain_;
  ConvBlock out_block_;
  Tensor out_weight_, out_bias_;
};

}  // namespace dpngan
