#pragma once

// Corpus loading, metadata encoding, the synthetic harmonic corpus, noise
// perturbation, deterministic splits and batching.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpngan/dsp.hpp"
#include "dpngan/tensor.hpp"
#include "dpngan/wav.hpp"

namespace dpngan {

// Metadata layout, version 1 (width 152):
//   [0, 11)    class one-hot: 10 classes + unknown
//   [11, 72)   speaker one-hot: 60 speakers + unknown
//   [72, 80)   scalar attributes (missing ones are 0)
//   [80, 152)  zero padding
namespace meta_layout {
inline constexpr std::size_t kWidth = 152;
inline constexpr std::size_t kClasses = 10;
inline constexpr std::size_t kClassOffset = 0;
inline constexpr std::size_t kSpeakers = 60;
inline constexpr std::size_t kSpeakerOffset = kClassOffset + kClasses + 1;
inline constexpr std::size_t kScalars = 8;
inline constexpr std::size_t kScalarOffset = kSpeakerOffset + kSpeakers + 1;
inline constexpr std::size_t kUsed = kScalarOffset + kScalars;
}  // namespace meta_layout

struct ClipAttributes {
  int class_id = -1;    // outside [0, 10) maps to the unknown slot
  int speaker_id = -1;  // outside [0, 60) maps to the unknown slot
  std::vector<double> scalars;
};

std::vector<double> encode_metadata(const ClipAttributes& attributes, std::size_t width = meta_layout::kWidth);

struct CorpusItem {
  std::string name;
  AudioClip clip;
  ClipAttributes attributes;
  std::vector<double> metadata;
};

struct Corpus {
  int sample_rate = 16000;
  std::vector<CorpusItem> items;
};

// Fundamental of synthetic class k: 110 * 2^(k/10) Hz.
double synthetic_fundamental(int class_id);

// Items are sums of 1-3 harmonics of their class fundamental with random
// phases, decreasing amplitudes and an attack/decay envelope.
Corpus synth_dataset(std::size_t n_items, std::size_t length, int sample_rate, std::uint64_t seed,
                     std::size_t meta_width = meta_layout::kWidth);

// Sidecar: optional "#dpn-meta v1" header, then one line per clip:
//   relative/path.wav <TAB> class <TAB> speaker [<TAB> scalar ...]
// Other lines starting with '#' are comments. Clips are resampled to
// `sample_rate`.
Corpus load_corpus(const std::filesystem::path& root, const std::filesystem::path& sidecar, int sample_rate,
                   std::size_t meta_width = meta_layout::kWidth);
void write_sidecar(const std::filesystem::path& path, const Corpus& corpus);

// clip + scale * N(0, 1), clipped to [-1, 1].
AudioClip add_noise(const AudioClip& clip, double scale, std::uint64_t seed);

struct DatasetSplit {
  std::vector<std::size_t> train, validation, test;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.9, validation = 0.01, test = 0.09;
};

DatasetSplit make_split(std::size_t n_items, const SplitFractions& fractions, std::uint64_t seed);

// Clips are cropped (random position per epoch) or zero-padded to
// `clip_length`; the mel of the cropped clip is computed on the fly.
struct Batch {
  std::vector<std::size_t> indices;
  Tensor mel;       // [B, n_mels, frames]
  Tensor metadata;  // [B, width]
  Tensor waveform;  // [B, clip_length]

  std::size_t size() const { return indices.size(); }
  Tensor mel_at(std::size_t b) const;
  Tensor metadata_at(std::size_t b) const;
  Tensor waveform_at(std::size_t b) const;
};

class BatchIterator {
 public:
  BatchIterator(const Corpus& corpus, std::vector<std::size_t> indices, std::size_t batch_size, std::uint64_t seed,
                std::size_t clip_length, const MelParams& mel);

  std::size_t batches_per_epoch() const;
  // Order of `indices` for one epoch (a permutation).
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  Batch batch(std::size_t epoch, std::size_t index_in_epoch) const;
  // Global step -> (epoch, batch) with a short final batch per epoch.
  Batch at_step(std::size_t step) const;

 private:
  const Corpus* corpus_;
  std::vector<std::size_t> indices_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t clip_length_;
  MelParams mel_;
};

}  // namespace dpngan
