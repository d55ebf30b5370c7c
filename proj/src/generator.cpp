#include "dpngan/generator.hpp"

#include "dpngan/dsp.hpp"
#include "dpngan/error.hpp"
#include "dpngan/layers.hpp"

namespace dpngan {

Generator::Generator(const GeneratorConfig& config, const AudioConfig& audio, std::uint64_t seed)
    : config_(config), audio_(audio) {
  Rng rng(mix_seed(seed, 0x67656eULL));
  frames_ = audio.frames();
  sequence_length_ = 2 * (frames_ / 2);
  if (frames_ < 2) throw ConfigError("audio.output_length", "generator needs at least two mel frames");
  if (audio.n_mels % 2 != 0) throw ConfigError("audio.n_mels", "must be even");

  const auto& c = config_;
  const std::size_t k0 = c.init_kernel;
  const std::size_t features = c.init_channels * (audio.n_mels / 2);
  init_weight_ = params_.add_uniform("gen.mel_init.conv.weight", Shape{c.init_channels, 1, k0, k0}, init_bound(k0 * k0), rng);
  init_bias_ = params_.add("gen.mel_init.conv.bias", Shape{c.init_channels});
  init_gain_ = params_.add("gen.mel_init.norm.gain", Shape{features}, 1.0);
  init_norm_bias_ = params_.add("gen.mel_init.norm.bias", Shape{features}, 0.0);

  if (c.use_metadata) {
    meta_w1_ = params_.add_uniform("gen.meta.fc1.weight", Shape{c.meta_hidden, c.meta_width}, init_bound(c.meta_width), rng);
    meta_b1_ = params_.add_uniform("gen.meta.fc1.bias", Shape{c.meta_hidden}, init_bound(c.meta_width), rng);
    meta_act_ = make_activation(params_, "gen.meta.act", c.activation, c.meta_hidden);
    meta_w2_ = params_.add_uniform("gen.meta.fc2.weight", Shape{c.meta_hidden, c.meta_hidden}, init_bound(c.meta_hidden), rng);
    meta_b2_ = params_.add_uniform("gen.meta.fc2.bias", Shape{c.meta_hidden}, init_bound(c.meta_hidden), rng);
  }

  const std::size_t fused = features + c.meta_hidden;
  const double up_bound = init_bound(std::max<std::size_t>(1, fused * c.upscale_kernel / 2));
  up_weight_ = params_.add_uniform("gen.upscale.weight", Shape{fused, c.dpn_channels, c.upscale_kernel}, up_bound, rng);
  up_bias_ = params_.add_uniform("gen.upscale.bias", Shape{c.dpn_channels}, up_bound, rng);

  BlockSpec block;
  block.dims = 1;
  block.in_channels = c.dpn_channels;
  block.out_channels = c.dpn_channels;
  block.kernel = c.block_kernel;
  block.psroi_bins = c.psroi_bins;
  block.deform = c.use_deform;
  block.psroi = c.use_psroi;
  block.activation = c.activation;
  for (std::size_t d = 0; d < c.dpn_depth; ++d) {
    if (c.use_dpn) {
      const std::string prefix = "gen.dpn.layer" + std::to_string(d);
      dpn_.push_back({ConvBlock(params_, prefix + ".block_a", block, rng), ConvBlock(params_, prefix + ".block_b", block, rng)});
    } else {
      const std::string prefix = "gen.dpn.plain" + std::to_string(d);
      PlainLayer layer;
      const double b = init_bound(c.dpn_channels * c.block_kernel);
      layer.weight = params_.add_uniform(prefix + ".conv.weight", Shape{c.dpn_channels, c.dpn_channels, c.block_kernel}, b, rng);
      layer.bias = params_.add_uniform(prefix + ".conv.bias", Shape{c.dpn_channels}, b, rng);
      layer.act = make_activation(params_, prefix + ".act", c.activation, c.dpn_channels);
      plain_.push_back(std::move(layer));
    }
  }

  BlockSpec out = block;
  out.out_channels = c.out_channels;
  out_block_ = ConvBlock(params_, "gen.out_block", out, rng);
  const std::size_t flat = c.out_channels * sequence_length_;
  out_weight_ = params_.add_uniform("gen.out.weight", Shape{audio.output_length, flat}, init_bound(flat), rng);
  out_bias_ = params_.add_uniform("gen.out.bias", Shape{audio.output_length}, init_bound(flat), rng);
}

Tensor Generator::mel_initiator(const Tensor& mel) const {
  Tensor m = mel;
  if (m.rank() == 2) m = reshape(m, Shape{1, m.extent(0), m.extent(1)});
  if (m.rank() != 3 || m.extent(0) != 1 || m.extent(1) != audio_.n_mels || m.extent(2) != frames_) {
    throw ShapeError("generator: mel must be [1, " + std::to_string(audio_.n_mels) + ", " + std::to_string(frames_) +
                     "], got " + shape_str(mel.shape()));
  }
  const std::size_t pad = (config_.init_kernel - 1) / 2;
  Tensor y = conv2d(m, init_weight_, init_bias_, Conv2dOptions{1, 1, pad, pad});
  y = max_pool2d(y, 2, 2);
  y = reshape(y, Shape{y.extent(0) * y.extent(1), y.extent(2)});
  return layer_norm(y, 0, init_gain_, init_norm_bias_);
}

Tensor Generator::metadata_initiator(const Tensor& meta) const {
  if (meta.rank() != 1 || meta.numel() != config_.meta_width) {
    throw ShapeError("generator: metadata must be [" + std::to_string(config_.meta_width) + "], got " + shape_str(meta.shape()));
  }
  if (!config_.use_metadata) return Tensor(Shape{config_.meta_hidden}, 0.0);
  Tensor h = dense(meta, meta_w1_, meta_b1_);
  h = reshape(apply_activation(meta_act_, reshape(h, Shape{config_.meta_hidden, 1})), Shape{config_.meta_hidden});
  return dense(h, meta_w2_, meta_b2_);
}

Tensor Generator::fuse_and_upscale(const Tensor& mel_features, const Tensor& meta_features) const {
  const std::size_t t = mel_features.extent(1);
  const Tensor fused = concat({mel_features, broadcast_columns(meta_features, t)}, 0);
  const Tensor up = transpose_conv1d(fused, up_weight_, up_bias_, 2);
  const std::size_t target = 2 * t;
  const std::size_t excess = up.extent(1) - target;
  return slice(up, 1, excess / 2, target);
}

Tensor Generator::dpn_layer(std::size_t index, const Tensor& x) const {
  if (index >= dpn_.size()) throw ValueError("generator: DPN layer index out of range");
  const std::size_t length = x.extent(1);
  Tensor h = length % 2 == 0 ? x : pad_zeros(x, 1, 0, 1);
  h = dpn_[index].block_a.forward(h);
  h = downsample(h, 2, config_.lowpass_cutoff);
  h = dpn_[index].block_b.forward(h);
  h = upsample(h, 2, config_.highpass_cutoff);
  return h.extent(1) == length ? h : slice(h, 1, 0, length);
}

Tensor Generator::dpn_module(const Tensor& x) const {
  if (!config_.use_dpn) {
    Tensor y = x;
    const std::size_t pad = (config_.block_kernel - 1) / 2;
    for (const auto& layer : plain_) y = apply_activation(layer.act, conv1d(y, layer.weight, layer.bias, Conv1dOptions{1, 1, pad}));
    return y;
  }
  Tensor h = x;
  std::vector<Tensor> outputs;
  for (std::size_t d = 0; d < dpn_.size(); ++d) {
    Tensor o = dpn_layer(d, h);
    if (d + 1 < dpn_.size()) h = add(h, o);
    outputs.push_back(std::move(o));
  }
  return outputs.size() == 1 ? outputs.front() : add_n(outputs);
}

Tensor Generator::output_head(const Tensor& x) const {
  return tanh(dense(flatten(out_block_.forward(x)), out_weight_, out_bias_));
}

Tensor Generator::forward(const Tensor& mel, const Tensor& meta) const {
  const Tensor features = mel_initiator(mel);
  const Tensor conditioning = metadata_initiator(meta);
  return output_head(dpn_module(fuse_and_upscale(features, conditioning)));
}

}  // namespace dpngan
