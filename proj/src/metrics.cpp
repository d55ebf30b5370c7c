#include "dpngan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

double frame_distance(const FeatureMatrix& a, std::size_t i, const FeatureMatrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double d = a.at(r, i) - b.at(r, j);
    s += d * d;
  }
  return std::sqrt(s);
}

struct PathCost {
  double cost = std::numeric_limits<double>::infinity();
  std::size_t length = 0;
  bool operator<(const PathCost& o) const { return cost < o.cost || (cost == o.cost && length < o.length); }
};

std::vector<double> at_rate(const AudioClip& clip, int rate) {
  if (clip.sample_rate == rate) return clip.samples;
  return resample(clip.samples, clip.sample_rate, rate);
}

std::pair<std::span<const double>, std::span<const double>> common_length(std::span<const double> a,
                                                                          std::span<const double> b,
                                                                          const char* metric) {
  if (a.empty() || b.empty()) throw ValueError(std::string(metric) + ": empty input");
  if (a.size() != b.size()) {
    warn(std::string(metric) + ": length mismatch (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
         "), truncating to the shorter");
  }
  const std::size_t n = std::min(a.size(), b.size());
  return {a.first(n), b.first(n)};
}

std::vector<double> padded_to_frame(std::span<const double> x, std::size_t n_fft) {
  std::vector<double> v(x.begin(), x.end());
  if (v.size() < n_fft) v.resize(n_fft, 0.0);
  return v;
}

}  // namespace

FeatureMatrix FeatureMatrix::frames(std::size_t start, std::size_t count) const {
  if (start + count > cols) throw ShapeError("features: frame range out of bounds");
  FeatureMatrix out{rows, count, std::vector<double>(rows * count)};
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(r * cols + start), count,
                out.values.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  return out;
}

FeatureMatrix mfcc(std::span<const double> x, const MelParams& params, std::size_t n_coeffs) {
  if (n_coeffs == 0 || n_coeffs > params.n_mels) throw ValueError("mfcc: need 1 <= n_coeffs <= n_mels");
  const auto samples = padded_to_frame(x, params.n_fft);
  const MelSpectrogram mel = mel_spectrogram(samples, params);
  const std::size_t m = mel.n_mels;
  FeatureMatrix out{n_coeffs, mel.n_frames, std::vector<double>(n_coeffs * mel.n_frames, 0.0)};
  std::vector<double> basis(n_coeffs * m);
  for (std::size_t k = 0; k < n_coeffs; ++k) {
    const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(m));
    for (std::size_t n = 0; n < m; ++n) {
      basis[k * m + n] = norm * std::cos(kPi * static_cast<double>(k) * (static_cast<double>(n) + 0.5) / static_cast<double>(m));
    }
  }
  for (std::size_t t = 0; t < mel.n_frames; ++t) {
    for (std::size_t k = 0; k < n_coeffs; ++k) {
      double s = 0.0;
      for (std::size_t n = 0; n < m; ++n) s += basis[k * m + n] * mel.at(n, t);
      out.values[k * mel.n_frames + t] = s;
    }
  }
  return out;
}

double sdtw_cost(const FeatureMatrix& patch, const FeatureMatrix& reference) {
  if (patch.cols == 0 || reference.cols == 0) throw ValueError("sdtw: empty input");
  if (patch.rows != reference.rows) throw ShapeError("sdtw: feature dimensions differ");
  if (patch.cols > reference.cols) throw ShapeError("sdtw: patch is longer than the reference");
  const std::size_t n = patch.cols, m = reference.cols;
  std::vector<PathCost> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double c = frame_distance(patch, i, reference, j);
      PathCost best = i == 0 ? PathCost{0.0, 0} : prev[j];
      if (j > 0) {
        best = std::min(best, cur[j - 1]);
        if (i > 0) best = std::min(best, prev[j - 1]);
      }
      cur[j] = {best.cost + c, best.length + 1};
    }
    std::swap(prev, cur);
  }
  const PathCost end = *std::min_element(prev.begin(), prev.end());
  return end.cost / static_cast<double>(end.length);
}

double warpq(const AudioClip& reference, const AudioClip& degraded, const MetricParams& params) {
  if (reference.samples.empty() || degraded.samples.empty()) throw ValueError("warpq: empty clip");
  if (!(params.patch_seconds > 0.0)) throw ValueError("warpq: patch length must be positive");
  const int rate = params.mel.sample_rate;
  const FeatureMatrix ref = mfcc(at_rate(reference, rate), params.mel, params.n_coeffs);
  const FeatureMatrix deg = mfcc(at_rate(degraded, rate), params.mel, params.n_coeffs);
  const auto patch_frames = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.patch_seconds * rate / static_cast<double>(params.mel.hop))));
  const std::size_t len = std::min({patch_frames, deg.cols, ref.cols});
  const std::size_t count = std::max<std::size_t>(1, deg.cols / len);
  std::vector<double> costs;
  costs.reserve(count);
  for (std::size_t p = 0; p < count; ++p) costs.push_back(sdtw_cost(deg.frames(p * len, len), ref));
  return median(std::move(costs));
}

double log_spectral_distance(std::span<const double> a, std::span<const double> b, const MelParams& params) {
  auto [x, y] = common_length(a, b, "log_spectral_distance");
  const auto xs = padded_to_frame(x, params.n_fft);
  const auto ys = padded_to_frame(y, params.n_fft);
  const ComplexSpectrogram sa = stft(xs, params.n_fft, params.hop);
  const ComplexSpectrogram sb = stft(ys, params.n_fft, params.hop);
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.values.size(); ++i) {
    const double d = 10.0 * std::log10(std::norm(sa.values[i]) + params.log_floor) -
                     10.0 * std::log10(std::norm(sb.values[i]) + params.log_floor);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(sa.values.size()));
}

double mel_cepstral_distance(std::span<const double> a, std::span<const double> b, const MelParams& params,
                             std::size_t n_coeffs) {
  if (n_coeffs < 2) throw ValueError("mel_cepstral_distance: need at least two coefficients");
  auto [x, y] = common_length(a, b, "mel_cepstral_distance");
  const FeatureMatrix ca = mfcc(x, params, n_coeffs);
  const FeatureMatrix cb = mfcc(y, params, n_coeffs);
  double acc = 0.0;
  for (std::size_t k = 1; k < n_coeffs; ++k) {
    for (std::size_t t = 0; t < ca.cols; ++t) {
      const double d = ca.at(k, t) - cb.at(k, t);
      acc += d * d;
    }
  }
  return std::sqrt(acc / static_cast<double>((n_coeffs - 1) * ca.cols));
}

MetricRow evaluate_pair(const std::string& name, const AudioClip& reference, const AudioClip& degraded,
                        const MetricParams& params) {
  const int rate = params.mel.sample_rate;
  const auto ref = at_rate(reference, rate);
  const auto deg = at_rate(degraded, rate);
  MetricRow row;
  row.name = name;
  row.warpq = warpq(reference, degraded, params);
  row.lsd = log_spectral_distance(ref, deg, params.mel);
  row.mcd = mel_cepstral_distance(ref, deg, params.mel, params.n_coeffs);
  return row;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValueError("median: no values");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

MetricSummary MetricReport::summary(double MetricRow::*field) const {
  if (rows.empty()) throw ValueError("metrics: empty report");
  std::vector<double> v;
  double sum = 0.0;
  for (const auto& r : rows) {
    v.push_back(r.*field);
    sum += r.*field;
  }
  return {sum / static_cast<double>(rows.size()), median(std::move(v))};
}

void MetricReport::write_csv(std::ostream& out) const {
  const auto& m = params.mel;
  out << "# dpngan-metrics v1 warpq=warpq-style n_coeffs=" << params.n_coeffs << " patch_seconds=" << params.patch_seconds
      << " sample_rate=" << m.sample_rate << " n_fft=" << m.n_fft << " hop=" << m.hop << " n_mels=" << m.n_mels << '\n';
  out << "name,warpq,lsd,mcd,pesq,stoi,fad,fdsd\n";
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.name << ',' << r.warpq << ',' << r.lsd << ',' << r.mcd << ",,,,\n";
  if (rows.empty()) return;
  const MetricSummary w = summary(&MetricRow::warpq), l = summary(&MetricRow::lsd), c = summary(&MetricRow::mcd);
  out << "mean," << w.mean << ',' << l.mean << ',' << c.mean << ",,,,\n";
  out << "median," << w.median << ',' << l.median << ',' << c.median << ",,,,\n";
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("metrics: cannot open " + path.string() + " for writing");
  write_csv(f);
  if (!f) throw FormatError("metrics: write failed for " + path.string());
}

std::string MetricReport::summary_text() const {
  std::ostringstream os;
  os << rows.size() << " pair(s) evaluated\n";
  if (rows.empty()) return os.str();
  os << std::fixed << std::setprecision(4);
  for (auto [label, field] : {std::pair{"warpq-style", &MetricRow::warpq}, {"lsd [dB]", &MetricRow::lsd}, {"mcd", &MetricRow::mcd}}) {
    const MetricSummary s = summary(field);
    os << "  " << std::left << std::setw(12) << label << " mean " << s.mean << "  median " << s.median << '\n';
  }
  return os.str();
}

}  // namespace dpngan
