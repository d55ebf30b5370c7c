#pragma once

// Objective audio metrics: a WARP-Q-style subsequence-DTW score over MFCC
// patches, log-spectral distance and mel-cepstral distance.

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dpngan/dsp.hpp"
#include "dpngan/wav.hpp"

namespace dpngan {

// Row-major [rows][cols] matrix of frame features (one column per frame).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  // Columns [start, start + count).
  FeatureMatrix frames(std::size_t start, std::size_t count) const;
};

// Orthonormal DCT-II of each log-mel frame, first n_coeffs kept. Signals
// shorter than one FFT frame are zero-padded to a single frame.
FeatureMatrix mfcc(std::span<const double> x, const MelParams& params, std::size_t n_coeffs = 13);

// Minimal accumulated Euclidean frame distance of `patch` aligned against any
// contiguous slice of `reference` (free start and end), steps (1,0), (0,1),
// (1,1). Among paths of minimal cost the shortest is chosen; the result is
// cost / path length.
double sdtw_cost(const FeatureMatrix& patch, const FeatureMatrix& reference);

struct MetricParams {
  MelParams mel;
  std::size_t n_coeffs = 13;
  double patch_seconds = 0.4;
};

// Median of sdtw_cost over non-overlapping degraded-MFCC patches against the
// reference MFCC. Lower is better.
double warpq(const AudioClip& reference, const AudioClip& degraded, const MetricParams& params);

// RMS of the dB log-magnitude STFT difference.
double log_spectral_distance(std::span<const double> a, std::span<const double> b, const MelParams& params);
// RMS of the MFCC difference without coefficient 0.
double mel_cepstral_distance(std::span<const double> a, std::span<const double> b, const MelParams& params,
                             std::size_t n_coeffs = 13);

struct MetricRow {
  std::string name;
  double warpq = 0.0;
  double lsd = 0.0;
  double mcd = 0.0;
};

MetricRow evaluate_pair(const std::string& name, const AudioClip& reference, const AudioClip& degraded,
                        const MetricParams& params);

struct MetricSummary {
  double mean = 0.0;
  double median = 0.0;
};

struct MetricReport {
  MetricParams params;
  std::vector<MetricRow> rows;

  MetricSummary summary(double MetricRow::*field) const;
  // CSV schema v1: a "# dpngan-metrics v1" header with the parameter block,
  // columns name,warpq,lsd,mcd,pesq,stoi,fad,fdsd (the last four reserved and
  // left empty), then "mean" and "median" rows.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  std::string summary_text() const;
};

double median(std::vector<double> values);

}  // namespace dpngan
