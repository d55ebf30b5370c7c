#include "dpngan/losses.hpp"

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

Tensor stack_scores(const std::vector<Tensor>& scores, const char* what) {
  if (scores.empty()) throw ValueError(std::string(what) + ": empty batch");
  for (const auto& s : scores) {
    if (s.numel() != 1) throw ShapeError(std::string(what) + ": scores must be scalars");
  }
  return scores.size() == 1 ? reshape(scores.front(), Shape{1}) : concat(scores, 0);
}

}  // namespace

Tensor adv_loss_generator(const std::vector<Tensor>& d_fake) {
  return mean(square(add_scalar(stack_scores(d_fake, "adv_loss_generator"), -1.0)));
}

Tensor adv_loss_discriminator(const std::vector<Tensor>& d_real, const std::vector<Tensor>& d_fake) {
  if (d_real.size() != d_fake.size()) throw ShapeError("adv_loss_discriminator: batch sizes differ");
  const Tensor real = stack_scores(d_real, "adv_loss_discriminator");
  const Tensor fake = stack_scores(d_fake, "adv_loss_discriminator");
  return add(mean(square(add_scalar(real, -1.0))), mean(square(fake)));
}

Tensor feature_matching_loss(const std::vector<Tensor>& taps_real, const std::vector<Tensor>& taps_fake) {
  if (taps_real.size() != taps_fake.size()) {
    throw ShapeError("feature_matching_loss: " + std::to_string(taps_real.size()) + " real taps vs " +
                     std::to_string(taps_fake.size()) + " generated taps");
  }
  if (taps_real.empty()) throw ValueError("feature_matching_loss: no feature taps");
  std::vector<Tensor> terms;
  terms.reserve(taps_real.size());
  for (std::size_t i = 0; i < taps_real.size(); ++i) {
    if (taps_real[i].shape() != taps_fake[i].shape()) {
      throw ShapeError("feature_matching_loss: tap " + std::to_string(i) + " shapes " + shape_str(taps_real[i].shape()) +
                       " and " + shape_str(taps_fake[i].shape()) + " differ");
    }
    terms.push_back(mean(abs(sub(taps_real[i], taps_fake[i]))));
  }
  return terms.size() == 1 ? terms.front() : add_n(terms);
}

Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& taps_real,
                             const std::vector<std::vector<Tensor>>& taps_fake) {
  if (taps_real.size() != taps_fake.size() || taps_real.empty()) {
    throw ShapeError("feature_matching_loss: batch sizes differ or are empty");
  }
  std::vector<Tensor> items;
  for (std::size_t b = 0; b < taps_real.size(); ++b) items.push_back(feature_matching_loss(taps_real[b], taps_fake[b]));
  return scale(items.size() == 1 ? items.front() : add_n(items), 1.0 / static_cast<double>(items.size()));
}

Tensor mel_loss(const Tensor& a, const Tensor& b, const MelParams& params) {
  if (a.numel() != b.numel()) {
    throw ShapeError("mel_loss: clip lengths " + std::to_string(a.numel()) + " and " + std::to_string(b.numel()) + " differ");
  }
  return mean(abs(sub(mel_spectrogram(a, params), mel_spectrogram(b, params))));
}

Tensor mel_loss_to_target(const Tensor& target_mel, const Tensor& waveform, const MelParams& params) {
  const Tensor mel = mel_spectrogram(waveform, params);
  if (mel.shape() != target_mel.shape()) {
    throw ShapeError("mel_loss: target " + shape_str(target_mel.shape()) + " vs generated " + shape_str(mel.shape()));
  }
  return mean(abs(sub(target_mel, mel)));
}

Tensor generator_total(const Tensor& adv, const Tensor& fm, const Tensor& mel, const LossWeights& weights) {
  if (weights.feature_matching < 0.0 || weights.mel < 0.0) throw ValueError("generator_total: weights must be non-negative");
  return add(add(adv, scale(fm, weights.feature_matching)), scale(mel, weights.mel));
}

}  // namespace dpngan
