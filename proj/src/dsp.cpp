#include "dpngan/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpngan/error.hpp"
#include "fft.hpp"

namespace dpngan {

using fft::cplx;

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::hann) {
    // periodic Hann
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::size_t stft_frame_count(std::size_t length, std::size_t n_fft, std::size_t hop) {
  if (n_fft == 0 || hop == 0) throw ValueError("stft: n_fft and hop must be positive");
  if (length < n_fft) {
    throw ShapeError("stft: input of " + std::to_string(length) + " samples is shorter than n_fft " +
                     std::to_string(n_fft));
  }
  return (length - n_fft) / hop + 1;
}

ComplexSpectrogram stft(std::span<const double> x, std::size_t n_fft, std::size_t hop, WindowKind window) {
  ComplexSpectrogram s;
  s.n_frames = stft_frame_count(x.size(), n_fft, hop);
  s.n_bins = n_fft / 2 + 1;
  s.values.resize(s.n_bins * s.n_frames);
  const auto w = make_window(window, n_fft);
  std::vector<double> frame(n_fft);
  std::vector<cplx> spec(s.n_bins);
  for (std::size_t t = 0; t < s.n_frames; ++t) {
    for (std::size_t i = 0; i < n_fft; ++i) frame[i] = w[i] * x[t * hop + i];
    fft::forward_real(frame, spec);
    for (std::size_t k = 0; k < s.n_bins; ++k) s.values[k * s.n_frames + t] = spec[k];
  }
  return s;
}

void MelParams::validate() const {
  if (sample_rate <= 0) throw ValueError("mel: sample rate must be positive");
  if (n_fft < 2 || hop == 0 || n_mels == 0) throw ValueError("mel: n_fft >= 2, hop >= 1 and n_mels >= 1 required");
  if (!(f_min >= 0.0) || !(f_min < upper_frequency()) || upper_frequency() > 0.5 * sample_rate + 1e-9) {
    throw ValueError("mel: require 0 <= f_min < f_max <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw ValueError("mel: log floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate, double f_min, double f_max) {
  if (!(f_min < f_max) || f_max > sample_rate / 2.0 + 1e-9 || f_min < 0.0) {
    throw ValueError("mel_filterbank: require 0 <= f_min < f_max <= sample_rate / 2");
  }
  const std::size_t n_bins = n_fft / 2 + 1;
  const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  std::vector<double> w(n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double row_sum = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double v = 0.0;
      if (f > lo && f <= mid) v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) v = (hi - f) / (hi - mid);
      w[m * n_bins + k] = v;
      row_sum += v;
    }
    if (!(row_sum > 0.0)) {
      throw ValueError("mel_filterbank: filter " + std::to_string(m) + " covers no FFT bin (n_mels " +
                       std::to_string(n_mels) + " too large for n_fft " + std::to_string(n_fft) + ")");
    }
  }
  return Tensor(Shape{n_mels, n_bins}, std::move(w));
}

namespace {

struct MelForward {
  std::size_t n_frames = 0, n_bins = 0;
  std::vector<cplx> spectra;     // [frame][bin]
  std::vector<double> mel_power; // [mel][frame]
};

MelForward mel_forward(std::span<const double> x, const MelParams& p, const Tensor& fb, const std::vector<double>& window) {
  MelForward f;
  f.n_frames = stft_frame_count(x.size(), p.n_fft, p.hop);
  f.n_bins = p.n_fft / 2 + 1;
  f.spectra.resize(f.n_frames * f.n_bins);
  f.mel_power.assign(p.n_mels * f.n_frames, 0.0);
  std::vector<double> frame(p.n_fft), power(f.n_bins);
  auto fbv = fb.values();
  for (std::size_t t = 0; t < f.n_frames; ++t) {
    for (std::size_t i = 0; i < p.n_fft; ++i) frame[i] = window[i] * x[t * p.hop + i];
    std::span<cplx> spec(f.spectra.data() + t * f.n_bins, f.n_bins);
    fft::forward_real(frame, spec);
    for (std::size_t k = 0; k < f.n_bins; ++k) power[k] = std::norm(spec[k]);
    for (std::size_t m = 0; m < p.n_mels; ++m) {
      const double* row = fbv.data() + m * f.n_bins;
      double acc = 0.0;
      for (std::size_t k = 0; k < f.n_bins; ++k) acc += row[k] * power[k];
      f.mel_power[m * f.n_frames + t] = acc;
    }
  }
  return f;
}

}  // namespace

MelSpectrogram mel_spectrogram(std::span<const double> x, const MelParams& params) {
  params.validate();
  const Tensor fb = mel_filterbank(params.n_mels, params.n_fft, params.sample_rate, params.f_min, params.upper_frequency());
  const auto window = make_window(WindowKind::hann, params.n_fft);
  MelForward f = mel_forward(x, params, fb, window);
  MelSpectrogram mel;
  mel.params = params;
  mel.n_mels = params.n_mels;
  mel.n_frames = f.n_frames;
  mel.values.resize(f.mel_power.size());
  for (std::size_t i = 0; i < mel.values.size(); ++i) mel.values[i] = std::log(f.mel_power[i] + params.log_floor);
  return mel;
}

Tensor mel_spectrogram(const Tensor& waveform, const MelParams& params) {
  if (waveform.rank() != 1) throw ShapeError("mel_spectrogram: waveform must be rank 1, got " + shape_str(waveform.shape()));
  params.validate();
  const Tensor fb = mel_filterbank(params.n_mels, params.n_fft, params.sample_rate, params.f_min, params.upper_frequency());
  auto window = make_window(WindowKind::hann, params.n_fft);
  MelForward f = mel_forward(waveform.values(), params, fb, window);
  std::vector<double> out(f.mel_power.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(f.mel_power[i] + params.log_floor);
  const std::size_t n_frames = f.n_frames;
  return record("mel_spectrogram", Shape{params.n_mels, n_frames}, std::move(out), {waveform},
                [params, fb, window = std::move(window), f = std::move(f)](detail::Node& self) {
                  auto gx = self.input_grad(0);
                  if (gx.empty()) return;
                  const std::size_t n = params.n_fft, nb = f.n_bins, nf = f.n_frames;
                  auto fbv = fb.values();
                  std::vector<double> g_power(nb), g_frame(n);
                  std::vector<cplx> z(nb);
                  for (std::size_t t = 0; t < nf; ++t) {
                    std::fill(g_power.begin(), g_power.end(), 0.0);
                    for (std::size_t m = 0; m < params.n_mels; ++m) {
                      const double gm = self.grad[m * nf + t] / (f.mel_power[m * nf + t] + params.log_floor);
                      if (gm == 0.0) continue;
                      const double* row = fbv.data() + m * nb;
                      for (std::size_t k = 0; k < nb; ++k) g_power[k] += gm * row[k];
                    }
                    // d|X_k|^2/du_n = 2 Re(X_k e^{+i theta}) summed over the
                    // one-sided bins; c2r doubles interior bins, so DC and
                    // Nyquist are doubled here to match.
                    for (std::size_t k = 0; k < nb; ++k) z[k] = g_power[k] * f.spectra[t * nb + k];
                    z[0] *= 2.0;
                    if (n % 2 == 0) z[nb - 1] *= 2.0;
                    fft::inverse_real(z, g_frame);
                    for (std::size_t i = 0; i < n; ++i) gx[t * params.hop + i] += window[i] * g_frame[i];
                  }
                });
}

void write_mel_dump(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("mel dump: cannot open " + path.string());
  f << "DPN-MEL v1 " << mel.n_mels << ' ' << mel.n_frames << ' ' << mel.params.sample_rate << ' '
    << mel.params.n_fft << ' ' << mel.params.hop << '\n';
  for (double v : mel.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    f.write(b, 8);
  }
  if (!f) throw FormatError("mel dump: write failed for " + path.string());
}

MelSpectrogram read_mel_dump(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("mel dump: cannot open " + path.string());
  std::string header;
  std::getline(f, header);
  std::istringstream hs(header);
  std::string magic, version;
  MelSpectrogram mel;
  hs >> magic >> version >> mel.n_mels >> mel.n_frames >> mel.params.sample_rate >> mel.params.n_fft >> mel.params.hop;
  if (!hs || magic != "DPN-MEL" || version != "v1") throw FormatError("mel dump: bad header in " + path.string());
  mel.params.n_mels = mel.n_mels;
  mel.values.resize(mel.n_mels * mel.n_frames);
  for (auto& v : mel.values) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8)) throw FormatError("mel dump: truncated data in " + path.string());
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, sizeof v);
  }
  return mel;
}

void write_mel_pgm(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("pgm: cannot open " + path.string());
  f << "P5\n" << mel.n_frames << ' ' << mel.n_mels << "\n255\n";
  const auto [lo, hi] = std::minmax_element(mel.values.begin(), mel.values.end());
  const double range = *hi - *lo;
  for (std::size_t r = 0; r < mel.n_mels; ++r) {
    const std::size_t m = mel.n_mels - 1 - r;
    for (std::size_t t = 0; t < mel.n_frames; ++t) {
      const double v = range > 0.0 ? (mel.at(m, t) - *lo) / range : 0.0;
      f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  }
}

// ---------------------------------------------------------------------------

std::complex<double> transfer(const FilterSpec& spec, double omega) {
  const std::complex<double> jr(0.0, omega / spec.cutoff);
  return spec.kind == FilterKind::low_pass ? 1.0 / (1.0 + jr) : jr / (1.0 + jr);
}

namespace {

void filter_rows(std::span<const double> in, std::span<double> out, std::size_t rows, std::size_t len,
                 const std::vector<cplx>& response) {
  const std::size_t nb = len / 2 + 1;
  std::vector<cplx> spec(nb);
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t r = 0; r < rows; ++r) {
    fft::forward_real(in.subspan(r * len, len), spec);
    for (std::size_t k = 0; k < nb; ++k) spec[k] *= response[k];
    auto dst = out.subspan(r * len, len);
    fft::inverse_real(spec, dst);
    for (auto& v : dst) v *= inv;
  }
}

}  // namespace

Tensor spectral_filter(const Tensor& x, const FilterSpec& spec) {
  if (!(spec.cutoff > 0.0) || spec.cutoff > kPi + 1e-12) {
    throw ValueError("spectral_filter: cutoff must lie in (0, pi], got " + std::to_string(spec.cutoff));
  }
  if (x.rank() < 1) throw ShapeError("spectral_filter: empty shape");
  const std::size_t len = x.shape().back();
  if (len < 2) throw ShapeError("spectral_filter: sequence length must be >= 2");
  const std::size_t rows = x.numel() / len;
  const std::size_t nb = len / 2 + 1;
  std::vector<cplx> response(nb), adjoint(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const double omega = kPi * static_cast<double>(k) / static_cast<double>(nb - 1);
    response[k] = transfer(spec, omega);
    adjoint[k] = std::conj(response[k]);
  }
  std::vector<double> out(x.numel());
  filter_rows(x.values(), out, rows, len, response);
  return record("spectral_filter", x.shape(), std::move(out), {x},
                [rows, len, adjoint = std::move(adjoint)](detail::Node& self) {
                  auto gx = self.input_grad(0);
                  if (gx.empty()) return;
                  std::vector<double> tmp(gx.size());
                  filter_rows(self.grad, tmp, rows, len, adjoint);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += tmp[i];
                });
}

Tensor downsample(const Tensor& x, std::size_t factor, double cutoff) {
  if (factor < 1) throw ValueError("downsample: factor must be >= 1");
  const Tensor filtered = spectral_filter(x, {cutoff, FilterKind::low_pass});
  if (factor == 1) return filtered;
  const std::size_t len = x.shape().back(), rows = x.numel() / len;
  const std::size_t lout = (len + factor - 1) / factor;
  Shape out_shape = x.shape();
  out_shape.back() = lout;
  auto fv = filtered.values();
  std::vector<double> out(rows * lout);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < lout; ++t) out[r * lout + t] = fv[r * len + t * factor];
  }
  return record("decimate", out_shape, std::move(out), {filtered}, [rows, len, lout, factor](detail::Node& self) {
    auto g = self.input_grad(0);
    if (g.empty()) return;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < lout; ++t) g[r * len + t * factor] += self.grad[r * lout + t];
    }
  });
}

Tensor upsample(const Tensor& x, std::size_t factor, double cutoff) {
  if (factor < 1) throw ValueError("upsample: factor must be >= 1");
  const std::size_t len = x.shape().back(), rows = x.numel() / len;
  const std::size_t lout = len * factor;
  Shape out_shape = x.shape();
  out_shape.back() = lout;
  // Position of output sample i in input coordinates, end points aligned.
  std::vector<std::size_t> left(lout);
  std::vector<double> frac(lout);
  for (std::size_t i = 0; i < lout; ++i) {
    const double p = lout > 1 ? static_cast<double>(i) * static_cast<double>(len - 1) / static_cast<double>(lout - 1) : 0.0;
    std::size_t l = static_cast<std::size_t>(std::floor(p));
    if (l >= len - 1) l = len > 1 ? len - 2 : 0;
    left[i] = l;
    frac[i] = len > 1 ? p - static_cast<double>(l) : 0.0;
  }
  auto xv = x.values();
  std::vector<double> out(rows * lout);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * len;
    for (std::size_t i = 0; i < lout; ++i) {
      const double a = xr[left[i]];
      const double b = len > 1 ? xr[left[i] + 1] : a;
      out[r * lout + i] = (1.0 - frac[i]) * a + frac[i] * b;
    }
  }
  Tensor interpolated = record("interpolate", out_shape, std::move(out), {x}, [rows, len, lout, left, frac](detail::Node& self) {
    auto g = self.input_grad(0);
    if (g.empty()) return;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < lout; ++i) {
        const double gi = self.grad[r * lout + i];
        if (len > 1) {
          g[r * len + left[i]] += (1.0 - frac[i]) * gi;
          g[r * len + left[i] + 1] += frac[i] * gi;
        } else {
          g[r * len] += gi;
        }
      }
    }
  });
  return spectral_filter(interpolated, {cutoff, FilterKind::high_pass});
}

// ---------------------------------------------------------------------------

double gaussian_kernel(double squared_distance, double sigma) {
  return std::exp(-squared_distance / (2.0 * sigma * sigma));
}

std::size_t gaussian_radius(double sigma) { return static_cast<std::size_t>(std::ceil(3.0 * sigma)); }

Tensor gaussian_kernel_smooth(const Tensor& x, const Tensor& sigma) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("gaussian_kernel_smooth: expected [C, L] or [C, L, W], got " + shape_str(x.shape()));
  }
  if (sigma.numel() != 1) throw ShapeError("gaussian_kernel_smooth: sigma must have one element");
  const double s = sigma.item();
  if (!(s > 0.0)) throw ValueError("gaussian_kernel_smooth: sigma must be positive");
  const std::size_t c = x.extent(0), len = x.extent(1), inner = x.rank() == 3 ? x.extent(2) : 1;
  const long radius = static_cast<long>(std::min<std::size_t>(gaussian_radius(s), len));
  // Kernel taps K(d) and dK/dsigma for d = 0..radius.
  std::vector<double> k(radius + 1), dk(radius + 1);
  for (long d = 0; d <= radius; ++d) {
    const double d2 = static_cast<double>(d * d);
    k[d] = gaussian_kernel(d2, s);
    dk[d] = k[d] * d2 / (s * s * s);
  }
  // Per-position normaliser over the in-range window.
  std::vector<double> norm(len), dnorm(len);
  for (long t = 0; t < static_cast<long>(len); ++t) {
    double n = 0.0, dn = 0.0;
    for (long u = std::max(0L, t - radius); u <= std::min<long>(len - 1, t + radius); ++u) {
      n += k[std::labs(t - u)];
      dn += dk[std::labs(t - u)];
    }
    norm[t] = n;
    dnorm[t] = dn;
  }
  auto xv = x.values();
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (long t = 0; t < static_cast<long>(len); ++t) {
      double* yt = out.data() + (ch * len + t) * inner;
      for (long u = std::max(0L, t - radius); u <= std::min<long>(len - 1, t + radius); ++u) {
        const double w = k[std::labs(t - u)] / norm[t];
        const double* xu = xv.data() + (ch * len + u) * inner;
        for (std::size_t i = 0; i < inner; ++i) yt[i] += w * xu[i];
      }
    }
  }
  return record("gaussian_kernel_smooth", x.shape(), std::move(out), {x, sigma},
                [=](detail::Node& self) {
                  auto xv = self.input_value(0);
                  auto gx = self.input_grad(0), gs = self.input_grad(1);
                  double acc_s = 0.0;
                  for (std::size_t ch = 0; ch < c; ++ch) {
                    for (long t = 0; t < static_cast<long>(len); ++t) {
                      const double* gy = self.grad.data() + (ch * len + t) * inner;
                      const double* yt = self.value.data() + (ch * len + t) * inner;
                      for (long u = std::max(0L, t - radius); u <= std::min<long>(len - 1, t + radius); ++u) {
                        const long d = std::labs(t - u);
                        const double w = k[d] / norm[t];
                        const double* xu = xv.data() + (ch * len + u) * inner;
                        for (std::size_t i = 0; i < inner; ++i) {
                          if (!gx.empty()) gx[(ch * len + u) * inner + i] += w * gy[i];
                          // dy/ds = (sum dK x - y sum dK) / norm
                          acc_s += gy[i] * (dk[d] * xu[i] - yt[i] * dk[d]) / norm[t];
                        }
                      }
                    }
                  }
                  (void)dnorm;
                  if (!gs.empty()) gs[0] += acc_s;
                });
}

// ---------------------------------------------------------------------------

std::vector<double> resample(std::span<const double> x, double from_rate, double to_rate) {
  if (!(from_rate > 0.0) || !(to_rate > 0.0)) throw ValueError("resample: rates must be positive");
  if (x.empty()) return {};
  if (from_rate == to_rate) return {x.begin(), x.end()};
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * to_rate / from_rate));
  std::vector<double> out(std::max<std::size_t>(n_out, 1));
  const double step = from_rate / to_rate;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p = static_cast<double>(i) * step;
    const auto l = static_cast<std::size_t>(std::floor(p));
    if (l + 1 >= x.size()) {
      out[i] = x.back();
      continue;
    }
    const double f = p - static_cast<double>(l);
    out[i] = (1.0 - f) * x[l] + f * x[l + 1];
  }
  return out;
}

}  // namespace dpngan
