#pragma once

// Least-squares adversarial losses, discriminator feature matching, mel L1
// reconstruction and the weighted generator objective. Batch reduction is the
// arithmetic mean throughout.

#include <vector>

#include "dpngan/dsp.hpp"
#include "dpngan/tensor.hpp"

namespace dpngan {

struct LossWeights {
  double feature_matching = 2.0;
  double mel = 45.0;
};

// mean_b (d_fake_b - 1)^2
Tensor adv_loss_generator(const std::vector<Tensor>& d_fake);
// mean_b (d_real_b - 1)^2 + d_fake_b^2
Tensor adv_loss_discriminator(const std::vector<Tensor>& d_real, const std::vector<Tensor>& d_fake);

// sum_i mean(|real_i - fake_i|) for one item.
Tensor feature_matching_loss(const std::vector<Tensor>& taps_real, const std::vector<Tensor>& taps_fake);
// Batch mean of the per-item loss.
Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& taps_real,
                             const std::vector<std::vector<Tensor>>& taps_fake);

// mean |mel(a) - mel(b)| over cells.
Tensor mel_loss(const Tensor& a, const Tensor& b, const MelParams& params);
// Variant with a precomputed log-mel target [n_mels, frames].
Tensor mel_loss_to_target(const Tensor& target_mel, const Tensor& waveform, const MelParams& params);

// adv + w.feature_matching * fm + w.mel * mel
Tensor generator_total(const Tensor& adv, const Tensor& fm, const Tensor& mel, const LossWeights& weights);

}  // namespace dpngan
