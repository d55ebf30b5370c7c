#include "dpngan/discriminator.hpp"

#include "dpngan/error.hpp"
#include "dpngan/layers.hpp"

namespace dpngan {
namespace {

// Mirror index for a tail position past the end, reflecting about the last
// sample without repeating it.
std::size_t reflect_index(std::size_t i, std::size_t length) {
  if (length == 1) return 0;
  const std::size_t period = 2 * (length - 1);
  std::size_t m = i % period;
  return m < length ? m : period - m;
}

}  // namespace

Tensor reshape_period(const Tensor& waveform, std::size_t period) {
  if (period == 0) throw ValueError("reshape_period: period must be positive");
  if (waveform.rank() != 1 || waveform.numel() == 0) throw ShapeError("reshape_period: expected a non-empty [T] waveform");
  const std::size_t t = waveform.numel();
  const std::size_t rows = (t + period - 1) / period;
  std::vector<std::size_t> source(rows * period);
  for (std::size_t i = 0; i < source.size(); ++i) source[i] = reflect_index(i, t);
  auto xv = waveform.values();
  std::vector<double> out(source.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[source[i]];
  return record("reshape_period", Shape{1, rows, period}, std::move(out), {waveform},
                [source = std::move(source)](detail::Node& self) {
                  auto g = self.input_grad(0);
                  for (std::size_t i = 0; i < source.size(); ++i) g[source[i]] += self.grad[i];
                });
}

Discriminator::SubDiscriminator Discriminator::build(const std::string& prefix, std::size_t dims, std::size_t period,
                                                     std::size_t length, std::size_t width, Rng& rng) {
  const auto& c = config_;
  SubDiscriminator sub;
  sub.period = period;
  const std::size_t per_branch = dims == 1 ? c.msd_channels : c.mcd_channels;
  const std::size_t out_channels = per_branch * c.kernels.size();
  std::size_t in_channels = 1;
  for (std::size_t b = 0; b < c.depth; ++b) {
    ResidualBlock block;
    block.stride = b + 1 == c.depth ? c.final_stride : 1;
    const std::string bp = prefix + ".block" + std::to_string(b);
    for (std::size_t k : c.kernels) {
      BlockSpec spec;
      spec.dims = dims;
      spec.in_channels = in_channels;
      spec.out_channels = per_branch;
      spec.kernel = k;
      spec.stride = block.stride;
      spec.psroi_bins = dims == 1 ? c.msd_psroi_bins : c.mcd_psroi_bins;
      spec.deform = dims == 1 ? c.use_deform_in_msd : c.use_deform_in_mcd;
      spec.psroi = c.use_psroi;
      spec.activation = c.activation;
      block.branches.emplace_back(params_, bp + ".k" + std::to_string(k), spec, rng);
    }
    length = block.branches.front().output_length(length);
    if (c.use_psroi && length < (dims == 1 ? c.msd_psroi_bins : c.mcd_psroi_bins)) {
      throw ConfigError("discriminator.depth", prefix + " sequence shrinks below the pooling bin count");
    }
    if (in_channels != out_channels || block.stride != 1) {
      const Shape shape = dims == 1 ? Shape{out_channels, in_channels, 1} : Shape{out_channels, in_channels, 1, 1};
      block.projection = params_.add_uniform(bp + ".proj.weight", shape, init_bound(in_channels), rng);
    }
    sub.blocks.push_back(std::move(block));
    in_channels = out_channels;
  }
  const std::size_t flat = out_channels * length * width;
  sub.fc_weight = params_.add_uniform(prefix + ".fc.weight", Shape{c.hidden, flat}, init_bound(flat), rng);
  sub.fc_bias = params_.add_uniform(prefix + ".fc.bias", Shape{c.hidden}, init_bound(flat), rng);
  sub.act = make_activation(params_, prefix + ".act", c.activation, c.hidden);
  return sub;
}

Discriminator::Discriminator(const DiscriminatorConfig& config, std::size_t input_length, std::uint64_t seed)
    : config_(config), input_length_(input_length) {
  if (!config.use_msd && !config.use_mcd) throw ConfigError("discriminator.use_msd", "at least one branch must be enabled");
  if (config.kernels.empty()) throw ConfigError("discriminator.kernels", "must not be empty");
  Rng rng(mix_seed(seed, 0x646973ULL));
  if (config.use_msd) {
    if (input_length < config.pool_kernel) throw ConfigError("discriminator.pool_kernel", "exceeds the input length");
    const std::size_t pooled = (input_length - config.pool_kernel) / config.pool_stride + 1;
    subs_.push_back(build("disc.msd", 1, 0, pooled, 1, rng));
  }
  if (config.use_mcd) {
    for (std::size_t p : config.periods) {
      subs_.push_back(build("disc.mcd.p" + std::to_string(p), 2, p, (input_length + p - 1) / p, p, rng));
    }
  }
  const std::size_t hidden = config.hidden;
  if (config.split_heads) {
    if (config.use_msd) {
      msd_head_weight_ = params_.add_uniform("disc.msd.head.weight", Shape{2, hidden}, init_bound(hidden), rng);
      msd_head_bias_ = params_.add("disc.msd.head.bias", Shape{2});
    }
    if (config.use_mcd) {
      const std::size_t width = hidden * config.periods.size();
      mcd_head_weight_ = params_.add_uniform("disc.mcd.head.weight", Shape{2, width}, init_bound(width), rng);
      mcd_head_bias_ = params_.add("disc.mcd.head.bias", Shape{2});
    }
  } else {
    const std::size_t width = hidden * subs_.size();
    head_weight_ = params_.add_uniform("disc.head.weight", Shape{2, width}, init_bound(width), rng);
    head_bias_ = params_.add("disc.head.bias", Shape{2});
  }
}

std::size_t Discriminator::tap_count() const {
  std::size_t n = 0;
  for (const auto& s : subs_) n += s.blocks.size();
  return n;
}

Tensor Discriminator::run(const SubDiscriminator& sub, Tensor x, std::vector<Tensor>& taps) const {
  for (const auto& block : sub.blocks) {
    std::vector<Tensor> outs;
    outs.reserve(block.branches.size());
    for (const auto& branch : block.branches) outs.push_back(branch.forward(x));
    Tensor y = outs.size() == 1 ? outs.front() : concat(outs, 0);
    Tensor residual = x;
    if (block.projection.defined()) {
      residual = x.rank() == 2 ? conv1d(x, block.projection, Tensor(), Conv1dOptions{block.stride, 1, 0})
                               : conv2d(x, block.projection, Tensor(), Conv2dOptions{block.stride, 1, 0, 0});
    }
    x = add(y, residual);
    taps.push_back(x);
  }
  const Tensor h = dense(flatten(x), sub.fc_weight, sub.fc_bias);
  return reshape(apply_activation(sub.act, reshape(h, Shape{config_.hidden, 1})), Shape{config_.hidden});
}

DiscriminatorOutput Discriminator::forward(const Tensor& waveform) const {
  if (waveform.rank() != 1 || waveform.numel() != input_length_) {
    throw ShapeError("discriminator: expected waveform [" + std::to_string(input_length_) + "], got " +
                     shape_str(waveform.shape()));
  }
  DiscriminatorOutput out;
  std::vector<Tensor> msd_features, mcd_features;
  for (const auto& sub : subs_) {
    if (sub.period == 0) {
      const Tensor pooled = avg_pool1d(reshape(waveform, Shape{1, input_length_}), config_.pool_kernel, config_.pool_stride);
      msd_features.push_back(run(sub, pooled, out.taps));
    } else {
      mcd_features.push_back(run(sub, reshape_period(waveform, sub.period), out.taps));
    }
  }
  auto real_node = [](const Tensor& logits) { return slice(sigmoid(logits), 0, 0, 1); };
  auto join = [](const std::vector<Tensor>& parts) { return parts.size() == 1 ? parts.front() : concat(parts, 0); };
  if (config_.split_heads) {
    std::vector<Tensor> scores;
    if (!msd_features.empty()) {
      out.msd_score = real_node(dense(join(msd_features), msd_head_weight_, msd_head_bias_));
      scores.push_back(out.msd_score);
    }
    if (!mcd_features.empty()) {
      out.mcd_score = real_node(dense(join(mcd_features), mcd_head_weight_, mcd_head_bias_));
      scores.push_back(out.mcd_score);
    }
    out.score = scores.size() == 1 ? scores.front() : mean(concat(scores, 0));
  } else {
    std::vector<Tensor> all = msd_features;
    all.insert(all.end(), mcd_features.begin(), mcd_features.end());
    out.score = real_node(dense(join(all), head_weight_, head_bias_));
  }
  return out;
}

}  // namespace dpngan
