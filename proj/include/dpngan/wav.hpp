#pragma once

// RIFF/WAVE PCM 16-bit reader and writer. Stereo input is averaged to mono;
// samples are scaled by 1/32768.

#include <filesystem>
#include <vector>

namespace dpngan {

struct AudioClip {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 16000;
};

AudioClip read_wav(const std::filesystem::path& path);
// Samples are clipped to [-1, 1] and rounded to the nearest 16-bit level.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace dpngan
