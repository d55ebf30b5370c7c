#include "dpngan/deform.hpp"

#include <cmath>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

void expect_shape(const char* op, const Tensor& t, const Shape& want, const char* what) {
  if (!t.defined() || t.shape() != want) {
    throw ShapeError(std::string(op) + ": " + what + " must be " + shape_str(want) + ", got " +
                     (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  }
}

// Linear interpolation weights of one sampling position on a grid of `len`.
struct Lerp {
  long left = 0;
  double frac = 0.0;
};

Lerp lerp_at(double p) {
  const double fl = std::floor(p);
  return {static_cast<long>(fl), p - fl};
}

inline double at_or_zero(const double* row, long len, long i) { return (i >= 0 && i < len) ? row[i] : 0.0; }

inline void add_if_valid(double* row, long len, long i, double v) {
  if (i >= 0 && i < len) row[i] += v;
}

// y[o, t] += sum_r w[o, r] col[r, t]
void gemm_wc(std::span<const double> w, const std::vector<double>& col, double* y, std::size_t cout,
             std::size_t rows, std::size_t n) {
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = y + o * n;
    for (std::size_t r = 0; r < rows; ++r) {
      const double wr = w[o * rows + r];
      if (wr == 0.0) continue;
      const double* cr = col.data() + r * n;
      for (std::size_t t = 0; t < n; ++t) yo[t] += wr * cr[t];
    }
  }
}

// Shared backward of the weight product: accumulates gw and bias grads,
// returns the column gradient (empty when no input needs it).
std::vector<double> gemm_backward(detail::Node& self, std::size_t w_index, const std::vector<double>& col,
                                  std::size_t cout, std::size_t rows, std::size_t n, bool need_col) {
  const double* gy = self.grad.data();
  auto wv = self.input_value(w_index);
  auto gw = self.input_grad(w_index);
  if (!gw.empty()) {
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* cr = col.data() + r * n;
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) acc += gy[o * n + t] * cr[t];
        gw[o * rows + r] += acc;
      }
    }
  }
  if (self.inputs.size() > w_index + 1 && self.inputs[w_index + 1]) {
    auto gb = self.input_grad(w_index + 1);
    for (std::size_t o = 0; o < gb.size(); ++o) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += gy[o * n + t];
      gb[o] += acc;
    }
  }
  std::vector<double> gcol;
  if (!need_col) return gcol;
  gcol.assign(rows * n, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double wr = wv[o * rows + r];
      if (wr == 0.0) continue;
      double* gr = gcol.data() + r * n;
      for (std::size_t t = 0; t < n; ++t) gr[t] += wr * gy[o * n + t];
    }
  }
  return gcol;
}

}  // namespace

std::vector<long> conv_grid(std::size_t kernel) {
  if (kernel == 0) throw ValueError("conv_grid: kernel must be positive");
  std::vector<long> grid(kernel);
  const long half = static_cast<long>(kernel / 2);
  for (std::size_t j = 0; j < kernel; ++j) grid[j] = static_cast<long>(j) - half;
  return grid;
}

double linear_sample(std::span<const double> x, double p) {
  const Lerp l = lerp_at(p);
  const long n = static_cast<long>(x.size());
  return (1.0 - l.frac) * at_or_zero(x.data(), n, l.left) + l.frac * at_or_zero(x.data(), n, l.left + 1);
}

Tensor linear_sample(const Tensor& x, const Tensor& positions) {
  if (x.rank() != 1 || positions.rank() != 1) throw ShapeError("linear_sample: x and positions must be rank 1");
  auto xv = x.values(), pv = positions.values();
  std::vector<double> out(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) out[i] = linear_sample(xv, pv[i]);
  return record("linear_sample", Shape{pv.size()}, std::move(out), {x, positions}, [](detail::Node& self) {
    auto xv = self.input_value(0), pv = self.input_value(1);
    auto gx = self.input_grad(0), gp = self.input_grad(1);
    const long n = static_cast<long>(xv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = self.grad[i];
      const Lerp l = lerp_at(pv[i]);
      if (!gx.empty()) {
        add_if_valid(gx.data(), n, l.left, (1.0 - l.frac) * g);
        add_if_valid(gx.data(), n, l.left + 1, l.frac * g);
      }
      if (!gp.empty()) gp[i] += g * (at_or_zero(xv.data(), n, l.left + 1) - at_or_zero(xv.data(), n, l.left));
    }
  });
}

Tensor deform_conv1d(const Tensor& x, const Tensor& offsets, const Tensor& w, const Tensor& bias,
                     const Conv1dOptions& opt) {
  if (x.rank() != 2 || w.rank() != 3) throw ShapeError("deform_conv1d: expected x [C, L] and w [C_out, C_in, k]");
  const std::size_t cin = x.extent(0), len = x.extent(1), cout = w.extent(0), k = w.extent(2);
  if (w.extent(1) != cin) throw ShapeError("deform_conv1d: weight " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
  if (bias.defined() && bias.shape() != Shape{cout}) throw ShapeError("deform_conv1d: bias must be [C_out]");
  const std::size_t lout = conv_output_length(len, k, opt.stride, opt.dilation, opt.padding);
  expect_shape("deform_conv1d", offsets, Shape{k, lout}, "offset field");

  auto xv = x.values(), ov = offsets.values();
  std::vector<Lerp> taps(k * lout);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t t = 0; t < lout; ++t) {
      const double base = static_cast<double>(t * opt.stride + j * opt.dilation) - static_cast<double>(opt.padding);
      taps[j * lout + t] = lerp_at(base + ov[j * lout + t]);
    }
  }
  const long n = static_cast<long>(len);
  std::vector<double> col(cin * k * lout);
  for (std::size_t c = 0; c < cin; ++c) {
    const double* xc = xv.data() + c * len;
    for (std::size_t j = 0; j < k; ++j) {
      double* cr = col.data() + (c * k + j) * lout;
      for (std::size_t t = 0; t < lout; ++t) {
        const Lerp& l = taps[j * lout + t];
        cr[t] = (1.0 - l.frac) * at_or_zero(xc, n, l.left) + l.frac * at_or_zero(xc, n, l.left + 1);
      }
    }
  }
  std::vector<double> out(cout * lout, 0.0);
  if (bias.defined()) {
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * lout, lout, bias[o]);
  }
  gemm_wc(w.values(), col, out.data(), cout, cin * k, lout);

  return record("deform_conv1d", Shape{cout, lout}, std::move(out), {x, offsets, w, bias},
                [=, taps = std::move(taps), col = std::move(col)](detail::Node& self) {
                  auto gx = self.input_grad(0), go = self.input_grad(1);
                  const bool need_col = !gx.empty() || !go.empty();
                  const auto gcol = gemm_backward(self, 2, col, cout, cin * k, lout, need_col);
                  if (!need_col) return;
                  auto xv = self.input_value(0);
                  for (std::size_t c = 0; c < cin; ++c) {
                    const double* xc = xv.data() + c * len;
                    for (std::size_t j = 0; j < k; ++j) {
                      const double* gr = gcol.data() + (c * k + j) * lout;
                      for (std::size_t t = 0; t < lout; ++t) {
                        const Lerp& l = taps[j * lout + t];
                        if (!gx.empty()) {
                          double* gxc = gx.data() + c * len;
                          add_if_valid(gxc, n, l.left, (1.0 - l.frac) * gr[t]);
                          add_if_valid(gxc, n, l.left + 1, l.frac * gr[t]);
                        }
                        if (!go.empty()) {
                          go[j * lout + t] += gr[t] * (at_or_zero(xc, n, l.left + 1) - at_or_zero(xc, n, l.left));
                        }
                      }
                    }
                  }
                });
}

Tensor deform_conv2d(const Tensor& x, const Tensor& offsets, const Tensor& w, const Tensor& bias,
                     const Conv2dOptions& opt) {
  if (x.rank() != 3 || w.rank() != 4) {
    throw ShapeError("deform_conv2d: expected x [C, H, W] and w [C_out, C_in, kH, kW]");
  }
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != cin) throw ShapeError("deform_conv2d: weight " + shape_str(w.shape()) + " vs input " + shape_str(x.shape()));
  if (bias.defined() && bias.shape() != Shape{cout}) throw ShapeError("deform_conv2d: bias must be [C_out]");
  const std::size_t hout = conv_output_length(h, kh, opt.stride_h, 1, opt.pad_h);
  const std::size_t wout = conv_output_length(wd, kw, opt.stride_w, 1, opt.pad_w);
  const std::size_t ntap = kh * kw, npos = hout * wout;
  expect_shape("deform_conv2d", offsets, Shape{2 * ntap, hout, wout}, "offset field");

  struct Bilerp {
    Lerp y, x;
  };
  auto ov = offsets.values();
  std::vector<Bilerp> taps(ntap * npos);
  for (std::size_t i = 0; i < kh; ++i) {
    for (std::size_t j = 0; j < kw; ++j) {
      const std::size_t tap = i * kw + j;
      for (std::size_t ty = 0; ty < hout; ++ty) {
        for (std::size_t tx = 0; tx < wout; ++tx) {
          const std::size_t pos = ty * wout + tx;
          const double py = static_cast<double>(ty * opt.stride_h + i) - static_cast<double>(opt.pad_h) +
                            ov[(2 * tap) * npos + pos];
          const double px = static_cast<double>(tx * opt.stride_w + j) - static_cast<double>(opt.pad_w) +
                            ov[(2 * tap + 1) * npos + pos];
          taps[tap * npos + pos] = {lerp_at(py), lerp_at(px)};
        }
      }
    }
  }
  const long lh = static_cast<long>(h), lw = static_cast<long>(wd);
  auto pixel = [lh, lw](const double* xc, long r, long c) {
    return (r >= 0 && r < lh && c >= 0 && c < lw) ? xc[r * lw + c] : 0.0;
  };
  auto xv = x.values();
  std::vector<double> col(cin * ntap * npos);
  for (std::size_t c = 0; c < cin; ++c) {
    const double* xc = xv.data() + c * h * wd;
    for (std::size_t tap = 0; tap < ntap; ++tap) {
      double* cr = col.data() + (c * ntap + tap) * npos;
      for (std::size_t pos = 0; pos < npos; ++pos) {
        const Bilerp& b = taps[tap * npos + pos];
        const double fy = b.y.frac, fx = b.x.frac;
        const long r = b.y.left, q = b.x.left;
        cr[pos] = (1 - fy) * ((1 - fx) * pixel(xc, r, q) + fx * pixel(xc, r, q + 1)) +
                  fy * ((1 - fx) * pixel(xc, r + 1, q) + fx * pixel(xc, r + 1, q + 1));
      }
    }
  }
  std::vector<double> out(cout * npos, 0.0);
  if (bias.defined()) {
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.data() + o * npos, npos, bias[o]);
  }
  gemm_wc(w.values(), col, out.data(), cout, cin * ntap, npos);

  return record("deform_conv2d", Shape{cout, hout, wout}, std::move(out), {x, offsets, w, bias},
                [=, taps = std::move(taps), col = std::move(col)](detail::Node& self) {
                  auto gx = self.input_grad(0), go = self.input_grad(1);
                  const bool need_col = !gx.empty() || !go.empty();
                  const auto gcol = gemm_backward(self, 2, col, cout, cin * ntap, npos, need_col);
                  if (!need_col) return;
                  auto xv = self.input_value(0);
                  auto scatter = [lh, lw](double* gxc, long r, long c, double v) {
                    if (r >= 0 && r < lh && c >= 0 && c < lw) gxc[r * lw + c] += v;
                  };
                  for (std::size_t c = 0; c < cin; ++c) {
                    const double* xc = xv.data() + c * h * wd;
                    for (std::size_t tap = 0; tap < ntap; ++tap) {
                      const double* gr = gcol.data() + (c * ntap + tap) * npos;
                      for (std::size_t pos = 0; pos < npos; ++pos) {
                        const double g = gr[pos];
                        if (g == 0.0) continue;
                        const Bilerp& b = taps[tap * npos + pos];
                        const double fy = b.y.frac, fx = b.x.frac;
                        const long r = b.y.left, q = b.x.left;
                        if (!gx.empty()) {
                          double* gxc = gx.data() + c * h * wd;
                          scatter(gxc, r, q, (1 - fy) * (1 - fx) * g);
                          scatter(gxc, r, q + 1, (1 - fy) * fx * g);
                          scatter(gxc, r + 1, q, fy * (1 - fx) * g);
                          scatter(gxc, r + 1, q + 1, fy * fx * g);
                        }
                        if (!go.empty()) {
                          const double v00 = pixel(xc, r, q), v01 = pixel(xc, r, q + 1);
                          const double v10 = pixel(xc, r + 1, q), v11 = pixel(xc, r + 1, q + 1);
                          go[(2 * tap) * npos + pos] += g * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
                          go[(2 * tap + 1) * npos + pos] += g * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
                        }
                      }
                    }
                  }
                });
}

Tensor deform_conv1d(const Tensor& x, const DeformConvWeights& weights, const Conv1dOptions& opt) {
  const Tensor offsets = conv1d(x, weights.offset_weight, weights.offset_bias, opt);
  return deform_conv1d(x, offsets, weights.weight, weights.bias, opt);
}

Tensor deform_conv2d(const Tensor& x, const DeformConvWeights& weights, const Conv2dOptions& opt) {
  const Tensor offsets = conv2d(x, weights.offset_weight, weights.offset_bias, opt);
  return deform_conv2d(x, offsets, weights.weight, weights.bias, opt);
}

// ---------------------------------------------------------------------------

BinRange psroi_bin(std::size_t start, std::size_t length, std::size_t bins, std::size_t i) {
  return {start + i * length / bins, start + (i + 1) * length / bins};
}

namespace {

void check_bins(const char* op, std::size_t channels, std::size_t groups, std::size_t length, std::size_t bins) {
  if (bins == 0) throw ValueError(std::string(op) + ": bin count must be positive");
  if (channels % groups != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(groups) + " position groups");
  }
  if (length < bins) {
    throw ShapeError(std::string(op) + ": region of " + std::to_string(length) + " positions leaves empty bins for K=" +
                     std::to_string(bins));
  }
}

}  // namespace

Tensor psroi_pool1d(const Tensor& x, std::size_t roi_start, std::size_t roi_length, std::size_t bins) {
  if (x.rank() != 2) throw ShapeError("psroi_pool1d: expected [C, L], got " + shape_str(x.shape()));
  const std::size_t c = x.extent(0), len = x.extent(1);
  check_bins("psroi_pool1d", c, bins, roi_length, bins);
  if (roi_start + roi_length > len) throw ShapeError("psroi_pool1d: region exceeds sequence length");
  const std::size_t g = c / bins;
  auto xv = x.values();
  std::vector<double> out(g * bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const BinRange b = psroi_bin(roi_start, roi_length, bins, i);
    for (std::size_t cc = 0; cc < g; ++cc) {
      const double* row = xv.data() + (i * g + cc) * len;
      double acc = 0.0;
      for (std::size_t q = b.begin; q < b.end; ++q) acc += row[q];
      out[cc * bins + i] = acc / static_cast<double>(b.end - b.begin);
    }
  }
  return record("psroi_pool1d", Shape{g, bins}, std::move(out), {x}, [=](detail::Node& self) {
    auto gx = self.input_grad(0);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < bins; ++i) {
      const BinRange b = psroi_bin(roi_start, roi_length, bins, i);
      const double inv = 1.0 / static_cast<double>(b.end - b.begin);
      for (std::size_t cc = 0; cc < g; ++cc) {
        const double v = self.grad[cc * bins + i] * inv;
        double* row = gx.data() + (i * g + cc) * len;
        for (std::size_t q = b.begin; q < b.end; ++q) row[q] += v;
      }
    }
  });
}

Tensor psroi_pool2d(const Tensor& x, const Roi2d& roi, std::size_t bins) {
  if (x.rank() != 3) throw ShapeError("psroi_pool2d: expected [C, H, W], got " + shape_str(x.shape()));
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  check_bins("psroi_pool2d", c, bins * bins, std::min(roi.height, roi.width), bins);
  if (roi.y0 + roi.height > h || roi.x0 + roi.width > w) throw ShapeError("psroi_pool2d: region exceeds map");
  const std::size_t g = c / (bins * bins);
  auto xv = x.values();
  std::vector<double> out(g * bins * bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const BinRange by = psroi_bin(roi.y0, roi.height, bins, i);
    for (std::size_t j = 0; j < bins; ++j) {
      const BinRange bx = psroi_bin(roi.x0, roi.width, bins, j);
      const double n = static_cast<double>((by.end - by.begin) * (bx.end - bx.begin));
      for (std::size_t cc = 0; cc < g; ++cc) {
        const double* m = xv.data() + ((i * bins + j) * g + cc) * h * w;
        double acc = 0.0;
        for (std::size_t r = by.begin; r < by.end; ++r) {
          for (std::size_t q = bx.begin; q < bx.end; ++q) acc += m[r * w + q];
        }
        out[(cc * bins + i) * bins + j] = acc / n;
      }
    }
  }
  return record("psroi_pool2d", Shape{g, bins, bins}, std::move(out), {x}, [=](detail::Node& self) {
    auto gx = self.input_grad(0);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < bins; ++i) {
      const BinRange by = psroi_bin(roi.y0, roi.height, bins, i);
      for (std::size_t j = 0; j < bins; ++j) {
        const BinRange bx = psroi_bin(roi.x0, roi.width, bins, j);
        const double n = static_cast<double>((by.end - by.begin) * (bx.end - bx.begin));
        for (std::size_t cc = 0; cc < g; ++cc) {
          const double v = self.grad[(cc * bins + i) * bins + j] / n;
          double* m = gx.data() + ((i * bins + j) * g + cc) * h * w;
          for (std::size_t r = by.begin; r < by.end; ++r) {
            for (std::size_t q = bx.begin; q < bx.end; ++q) m[r * w + q] += v;
          }
        }
      }
    }
  });
}

Tensor psroi_layer(const Tensor& x, std::size_t bins) {
  if (x.rank() == 2) {
    const std::size_t c = x.extent(0), len = x.extent(1);
    check_bins("psroi_layer", c, bins, len, bins);
    const std::size_t g = c / bins;
    auto xv = x.values();
    std::vector<double> out(g * len);
    for (std::size_t i = 0; i < bins; ++i) {
      const BinRange b = psroi_bin(0, len, bins, i);
      for (std::size_t cc = 0; cc < g; ++cc) {
        const double* row = xv.data() + (i * g + cc) * len;
        double acc = 0.0;
        for (std::size_t q = b.begin; q < b.end; ++q) acc += row[q];
        const double m = acc / static_cast<double>(b.end - b.begin);
        std::fill(out.begin() + static_cast<long>(cc * len + b.begin), out.begin() + static_cast<long>(cc * len + b.end), m);
      }
    }
    return record("psroi_layer", Shape{g, len}, std::move(out), {x}, [=](detail::Node& self) {
      auto gx = self.input_grad(0);
      if (gx.empty()) return;
      for (std::size_t i = 0; i < bins; ++i) {
        const BinRange b = psroi_bin(0, len, bins, i);
        const double inv = 1.0 / static_cast<double>(b.end - b.begin);
        for (std::size_t cc = 0; cc < g; ++cc) {
          double acc = 0.0;
          for (std::size_t q = b.begin; q < b.end; ++q) acc += self.grad[cc * len + q];
          double* row = gx.data() + (i * g + cc) * len;
          for (std::size_t q = b.begin; q < b.end; ++q) row[q] += acc * inv;
        }
      }
    });
  }
  if (x.rank() == 3) {
    const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
    check_bins("psroi_layer", c, bins * bins, std::min(h, w), bins);
    const std::size_t g = c / (bins * bins);
    auto xv = x.values();
    std::vector<double> out(g * h * w);
    for (std::size_t i = 0; i < bins; ++i) {
      const BinRange by = psroi_bin(0, h, bins, i);
      for (std::size_t j = 0; j < bins; ++j) {
        const BinRange bx = psroi_bin(0, w, bins, j);
        const double n = static_cast<double>((by.end - by.begin) * (bx.end - bx.begin));
        for (std::size_t cc = 0; cc < g; ++cc) {
          const double* m = xv.data() + ((i * bins + j) * g + cc) * h * w;
          double acc = 0.0;
          for (std::size_t r = by.begin; r < by.end; ++r) {
            for (std::size_t q = bx.begin; q < bx.end; ++q) acc += m[r * w + q];
          }
          double* o = out.data() + cc * h * w;
          for (std::size_t r = by.begin; r < by.end; ++r) {
            for (std::size_t q = bx.begin; q < bx.end; ++q) o[r * w + q] = acc / n;
          }
        }
      }
    }
    return record("psroi_layer", Shape{g, h, w}, std::move(out), {x}, [=](detail::Node& self) {
      auto gx = self.input_grad(0);
      if (gx.empty()) return;
      for (std::size_t i = 0; i < bins; ++i) {
        const BinRange by = psroi_bin(0, h, bins, i);
        for (std::size_t j = 0; j < bins; ++j) {
          const BinRange bx = psroi_bin(0, w, bins, j);
          const double n = static_cast<double>((by.end - by.begin) * (bx.end - bx.begin));
          for (std::size_t cc = 0; cc < g; ++cc) {
            const double* go = self.grad.data() + cc * h * w;
            double acc = 0.0;
            for (std::size_t r = by.begin; r < by.end; ++r) {
              for (std::size_t q = bx.begin; q < bx.end; ++q) acc += go[r * w + q];
            }
            double* m = gx.data() + ((i * bins + j) * g + cc) * h * w;
            for (std::size_t r = by.begin; r < by.end; ++r) {
              for (std::size_t q = bx.begin; q < bx.end; ++q) m[r * w + q] += acc / n;
            }
          }
        }
      }
    });
  }
  throw ShapeError("psroi_layer: expected [C, L] or [C, H, W], got " + shape_str(x.shape()));
}

}  // namespace dpngan
