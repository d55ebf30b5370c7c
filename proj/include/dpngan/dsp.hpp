#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "dpngan/tensor.hpp"

namespace dpngan {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// STFT and mel features

enum class WindowKind { hann, rectangular };

std::vector<double> make_window(WindowKind kind, std::size_t n);

// Frames without centre padding: floor((L - n_fft) / hop) + 1.
std::size_t stft_frame_count(std::size_t length, std::size_t n_fft, std::size_t hop);

struct ComplexSpectrogram {
  std::size_t n_bins = 0;    // n_fft / 2 + 1
  std::size_t n_frames = 0;
  std::vector<std::complex<double>> values;  // [bin][frame]
  std::complex<double> at(std::size_t bin, std::size_t frame) const { return values[bin * n_frames + frame]; }
};

ComplexSpectrogram stft(std::span<const double> x, std::size_t n_fft, std::size_t hop,
                        WindowKind window = WindowKind::hann);

struct MelParams {
  int sample_rate = 16000;
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means sample_rate / 2
  double log_floor = 1e-10;

  double upper_frequency() const { return f_max > 0.0 ? f_max : 0.5 * sample_rate; }
  void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters equally spaced on the mel scale, [n_mels, n_fft/2+1].
// Throws if any filter covers no FFT bin.
Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate, double f_min, double f_max);

struct MelSpectrogram {
  MelParams params;
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<double> values;  // row-major [mel][frame], log(power + floor)
  double at(std::size_t mel, std::size_t frame) const { return values[mel * n_frames + frame]; }
  Tensor as_tensor() const { return Tensor(Shape{n_mels, n_frames}, values); }
};

MelSpectrogram mel_spectrogram(std::span<const double> x, const MelParams& params);

// Differentiable variant: waveform [L] -> [n_mels, n_frames].
Tensor mel_spectrogram(const Tensor& waveform, const MelParams& params);

// Dump format: text header line "DPN-MEL v1 n_mels n_frames sr n_fft hop"
// followed by row-major little-endian f64 values.
void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel_dump(const std::filesystem::path& path);
// 8-bit binary PGM, n_mels rows (highest band on top) by n_frames columns.
void write_mel_pgm(const std::filesystem::path& path, const MelSpectrogram& mel);

// ---------------------------------------------------------------------------
// First-order algebraic filter pair
//   H_LP(w) = 1 / (1 + j w/wc),   H_HP(w) = (j w/wc) / (1 + j w/wc)

enum class FilterKind { low_pass, high_pass };

struct FilterSpec {
  double cutoff = kPi / 2.0;  // normalised angular frequency in (0, pi]
  FilterKind kind = FilterKind::low_pass;
};

std::complex<double> transfer(const FilterSpec& spec, double omega);

// Frequency-domain filtering along the last axis of x ([L] or [C, L]); the
// K = L/2+1 non-negative bins are mapped to w_k = pi k / (K-1).
Tensor spectral_filter(const Tensor& x, const FilterSpec& spec);

// Low-pass then keep every factor-th sample: ceil(L / factor) samples.
Tensor downsample(const Tensor& x, std::size_t factor, double cutoff = kPi / 2.0);
// Linear interpolation to factor * L samples (end points aligned), then high-pass.
Tensor upsample(const Tensor& x, std::size_t factor, double cutoff = kPi / 2.0);

// ---------------------------------------------------------------------------
// Gaussian kernel smoothing along axis 1 of [C, L] or [C, L, W]

double gaussian_kernel(double squared_distance, double sigma);
std::size_t gaussian_radius(double sigma);

// sigma is a one-element tensor and receives a gradient.
Tensor gaussian_kernel_smooth(const Tensor& x, const Tensor& sigma);

// ---------------------------------------------------------------------------

// Linear-interpolation resampling; output length round(L * to / from).
std::vector<double> resample(std::span<const double> x, double from_rate, double to_rate);

}  // namespace dpngan
