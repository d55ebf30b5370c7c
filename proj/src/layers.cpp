#include "dpngan/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

void expect_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
  }
}

void expect_bias(const char* op, const Tensor& bias, std::size_t channels) {
  if (bias.defined() && (bias.rank() != 1 || bias.numel() != channels)) {
    throw ShapeError(std::string(op) + ": bias shape " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(channels) + " output channels");
  }
}

// Range [lo, hi) of output positions t with 0 <= t*stride - pad + offset < length.
struct ValidRange {
  std::size_t lo = 0, hi = 0;
};

ValidRange valid_outputs(std::size_t out_len, std::size_t length, std::size_t stride, long shift) {
  // index = t*stride + shift
  long lo = 0;
  if (shift < 0) lo = (-shift + static_cast<long>(stride) - 1) / static_cast<long>(stride);
  long last = static_cast<long>(length) - 1 - shift;
  if (last < 0) return {};
  long hi = last / static_cast<long>(stride) + 1;
  hi = std::min<long>(hi, static_cast<long>(out_len));
  if (lo >= hi) return {};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t dilation, std::size_t padding) {
  if (stride == 0 || dilation == 0) throw ValueError("convolution: stride and dilation must be >= 1");
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (length + 2 * padding < span) {
    throw ShapeError("convolution: kernel span " + std::to_string(span) + " exceeds padded length " +
                     std::to_string(length + 2 * padding));
  }
  return (length + 2 * padding - span) / stride + 1;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv1dOptions& opt) {
  expect_rank("conv1d", x, 2, "input");
  expect_rank("conv1d", w, 3, "weight");
  const std::size_t cin = x.extent(0), len = x.extent(1);
  const std::size_t cout = w.extent(0), k = w.extent(2);
  if (w.extent(1) != cin) {
    throw ShapeError("conv1d: weight " + shape_str(w.shape()) + " expects " + std::to_string(w.extent(1)) +
                     " input channels, input has " + std::to_string(cin));
  }
  expect_bias("conv1d", bias, cout);
  const std::size_t lout = conv_output_length(len, k, opt.stride, opt.dilation, opt.padding);
  const std::size_t s = opt.stride, d = opt.dilation;
  const long pad = static_cast<long>(opt.padding);

  auto xv = x.values(), wv = w.values();
  std::vector<double> out(cout * lout, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = out.data() + o * lout;
    if (bias.defined()) std::fill_n(yo, lout, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xv.data() + c * len;
      for (std::size_t j = 0; j < k; ++j) {
        const double wj = wv[(o * cin + c) * k + j];
        const long shift = static_cast<long>(j * d) - pad;
        const ValidRange r = valid_outputs(lout, len, s, shift);
        for (std::size_t t = r.lo; t < r.hi; ++t) yo[t] += wj * xc[static_cast<long>(t * s) + shift];
      }
    }
  }
  return record("conv1d", Shape{cout, lout}, std::move(out), {x, w, bias.defined() ? bias : Tensor()},
                [=](detail::Node& self) {
                  auto xv = self.input_value(0), wv = self.input_value(1);
                  auto gx = self.input_grad(0), gw = self.input_grad(1);
                  const double* gy = self.grad.data();
                  for (std::size_t o = 0; o < cout; ++o) {
                    const double* go = gy + o * lout;
                    for (std::size_t c = 0; c < cin; ++c) {
                      const double* xc = xv.data() + c * len;
                      for (std::size_t j = 0; j < k; ++j) {
                        const std::size_t widx = (o * cin + c) * k + j;
                        const long shift = static_cast<long>(j * d) - pad;
                        const ValidRange r = valid_outputs(lout, len, s, shift);
                        if (!gw.empty()) {
                          double acc = 0.0;
                          for (std::size_t t = r.lo; t < r.hi; ++t) acc += go[t] * xc[static_cast<long>(t * s) + shift];
                          gw[widx] += acc;
                        }
                        if (!gx.empty()) {
                          const double wj = wv[widx];
                          double* gxc = gx.data() + c * len;
                          for (std::size_t t = r.lo; t < r.hi; ++t) gxc[static_cast<long>(t * s) + shift] += wj * go[t];
                        }
                      }
                    }
                  }
                  if (self.inputs.size() > 2 && self.inputs[2]) {
                    auto gb = self.input_grad(2);
                    for (std::size_t o = 0; o < gb.size(); ++o) {
                      double acc = 0.0;
                      for (std::size_t t = 0; t < lout; ++t) acc += gy[o * lout + t];
                      gb[o] += acc;
                    }
                  }
                });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const Conv2dOptions& opt) {
  expect_rank("conv2d", x, 3, "input");
  expect_rank("conv2d", w, 4, "weight");
  const std::size_t cin = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const std::size_t cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  if (w.extent(1) != cin) {
    throw ShapeError("conv2d: weight " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
  }
  expect_bias("conv2d", bias, cout);
  const std::size_t hout = conv_output_length(h, kh, opt.stride_h, 1, opt.pad_h);
  const std::size_t wout = conv_output_length(wd, kw, opt.stride_w, 1, opt.pad_w);
  const std::size_t sh = opt.stride_h, sw = opt.stride_w;
  const long ph = static_cast<long>(opt.pad_h), pw = static_cast<long>(opt.pad_w);

  auto xv = x.values(), wv = w.values();
  std::vector<double> out(cout * hout * wout, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = out.data() + o * hout * wout;
    if (bias.defined()) std::fill_n(yo, hout * wout, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = xv.data() + c * h * wd;
      for (std::size_t a = 0; a < kh; ++a) {
        const ValidRange rr = valid_outputs(hout, h, sh, static_cast<long>(a) - ph);
        for (std::size_t b = 0; b < kw; ++b) {
          const double wab = wv[((o * cin + c) * kh + a) * kw + b];
          const ValidRange rc = valid_outputs(wout, wd, sw, static_cast<long>(b) - pw);
          for (std::size_t i = rr.lo; i < rr.hi; ++i) {
            const double* xrow = xc + (static_cast<long>(i * sh) + static_cast<long>(a) - ph) * static_cast<long>(wd);
            double* yrow = yo + i * wout;
            for (std::size_t j = rc.lo; j < rc.hi; ++j) {
              yrow[j] += wab * xrow[static_cast<long>(j * sw) + static_cast<long>(b) - pw];
            }
          }
        }
      }
    }
  }
  return record(
      "conv2d", Shape{cout, hout, wout}, std::move(out), {x, w, bias.defined() ? bias : Tensor()},
      [=](detail::Node& self) {
        auto xv = self.input_value(0), wv = self.input_value(1);
        auto gx = self.input_grad(0), gw = self.input_grad(1);
        const double* gy = self.grad.data();
        for (std::size_t o = 0; o < cout; ++o) {
          const double* go = gy + o * hout * wout;
          for (std::size_t c = 0; c < cin; ++c) {
            const double* xc = xv.data() + c * h * wd;
            for (std::size_t a = 0; a < kh; ++a) {
              const ValidRange rr = valid_outputs(hout, h, sh, static_cast<long>(a) - ph);
              for (std::size_t b = 0; b < kw; ++b) {
                const std::size_t widx = ((o * cin + c) * kh + a) * kw + b;
                const ValidRange rc = valid_outputs(wout, wd, sw, static_cast<long>(b) - pw);
                double acc = 0.0;
                const double wab = wv[widx];
                for (std::size_t i = rr.lo; i < rr.hi; ++i) {
                  const long row = static_cast<long>(i * sh) + static_cast<long>(a) - ph;
                  const double* xrow = xc + row * static_cast<long>(wd);
                  const double* grow = go + i * wout;
                  for (std::size_t j = rc.lo; j < rc.hi; ++j) {
                    const long col = static_cast<long>(j * sw) + static_cast<long>(b) - pw;
                    acc += grow[j] * xrow[col];
                    if (!gx.empty()) gx[c * h * wd + row * static_cast<long>(wd) + col] += wab * grow[j];
                  }
                }
                if (!gw.empty()) gw[widx] += acc;
              }
            }
          }
        }
        if (self.inputs.size() > 2 && self.inputs[2]) {
          auto gb = self.input_grad(2);
          for (std::size_t o = 0; o < gb.size(); ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < hout * wout; ++i) acc += gy[o * hout * wout + i];
            gb[o] += acc;
          }
        }
      });
}

Tensor transpose_conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride) {
  expect_rank("transpose_conv1d", x, 2, "input");
  expect_rank("transpose_conv1d", w, 3, "weight");
  if (stride == 0) throw ValueError("transpose_conv1d: stride must be >= 1");
  const std::size_t cin = x.extent(0), len = x.extent(1);
  const std::size_t cout = w.extent(1), k = w.extent(2);
  if (w.extent(0) != cin) {
    throw ShapeError("transpose_conv1d: weight " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()));
  }
  expect_bias("transpose_conv1d", bias, cout);
  const std::size_t lout = (len - 1) * stride + k;
  auto xv = x.values(), wv = w.values();
  std::vector<double> out(cout * lout, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    if (bias.defined()) std::fill_n(out.begin() + o * lout, lout, bias[o]);
  }
  for (std::size_t i = 0; i < cin; ++i) {
    const double* xi = xv.data() + i * len;
    for (std::size_t o = 0; o < cout; ++o) {
      double* yo = out.data() + o * lout;
      const double* wio = wv.data() + (i * cout + o) * k;
      for (std::size_t t = 0; t < len; ++t) {
        const double xt = xi[t];
        double* yt = yo + t * stride;
        for (std::size_t j = 0; j < k; ++j) yt[j] += xt * wio[j];
      }
    }
  }
  return record("transpose_conv1d", Shape{cout, lout}, std::move(out), {x, w, bias.defined() ? bias : Tensor()},
                [=](detail::Node& self) {
                  auto xv = self.input_value(0), wv = self.input_value(1);
                  auto gx = self.input_grad(0), gw = self.input_grad(1);
                  const double* gy = self.grad.data();
                  for (std::size_t i = 0; i < cin; ++i) {
                    const double* xi = xv.data() + i * len;
                    for (std::size_t o = 0; o < cout; ++o) {
                      const double* go = gy + o * lout;
                      const double* wio = wv.data() + (i * cout + o) * k;
                      for (std::size_t t = 0; t < len; ++t) {
                        const double* gt = go + t * stride;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < k; ++j) {
                          acc += gt[j] * wio[j];
                          if (!gw.empty()) gw[(i * cout + o) * k + j] += gt[j] * xi[t];
                        }
                        if (!gx.empty()) gx[i * len + t] += acc;
                      }
                    }
                  }
                  if (self.inputs.size() > 2 && self.inputs[2]) {
                    auto gb = self.input_grad(2);
                    for (std::size_t o = 0; o < gb.size(); ++o) {
                      double acc = 0.0;
                      for (std::size_t t = 0; t < lout; ++t) acc += gy[o * lout + t];
                      gb[o] += acc;
                    }
                  }
                });
}

Tensor avg_pool1d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  expect_rank("avg_pool1d", x, 2, "input");
  if (kernel == 0 || stride == 0) throw ValueError("avg_pool1d: kernel and stride must be >= 1");
  const std::size_t c = x.extent(0), len = x.extent(1);
  if (kernel > len) {
    throw ShapeError("avg_pool1d: window " + std::to_string(kernel) + " larger than input length " +
                     std::to_string(len));
  }
  const std::size_t lout = (len - kernel) / stride + 1;
  const double inv = 1.0 / static_cast<double>(kernel);
  auto xv = x.values();
  std::vector<double> out(c * lout);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t t = 0; t < lout; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kernel; ++j) acc += xv[ch * len + t * stride + j];
      out[ch * lout + t] = acc * inv;
    }
  }
  return record("avg_pool1d", Shape{c, lout}, std::move(out), {x}, [=](detail::Node& self) {
    auto gx = self.input_grad(0);
    if (gx.empty()) return;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t t = 0; t < lout; ++t) {
        const double g = self.grad[ch * lout + t] * inv;
        for (std::size_t j = 0; j < kernel; ++j) gx[ch * len + t * stride + j] += g;
      }
    }
  });
}

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  expect_rank("max_pool2d", x, 3, "input");
  if (kernel == 0 || stride == 0) throw ValueError("max_pool2d: kernel and stride must be >= 1");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  if (kernel > h || kernel > w) {
    throw ShapeError("max_pool2d: window " + std::to_string(kernel) + " larger than input " + shape_str(x.shape()));
  }
  const std::size_t hout = (h - kernel) / stride + 1, wout = (w - kernel) / stride + 1;
  auto xv = x.values();
  std::vector<double> out(c * hout * wout);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < hout; ++i) {
      for (std::size_t j = 0; j < wout; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t a = 0; a < kernel; ++a) {
          for (std::size_t b = 0; b < kernel; ++b) {
            const std::size_t idx = (ch * h + i * stride + a) * w + j * stride + b;
            if (xv[idx] > best) {
              best = xv[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (ch * hout + i) * wout + j;
        out[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
  return record("max_pool2d", Shape{c, hout, wout}, std::move(out), {x},
                [argmax = std::move(argmax)](detail::Node& self) {
                  auto gx = self.input_grad(0);
                  if (gx.empty()) return;
                  for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += self.grad[o];
                });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, const Tensor& gain, const Tensor& bias, double epsilon) {
  if (axis >= x.rank()) throw ShapeError("layer_norm: axis out of range for " + shape_str(x.shape()));
  if (!(epsilon > 0.0)) throw ValueError("layer_norm: epsilon must be positive");
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(n) + " elements");
  }
  auto xv = x.values(), gv = gain.values(), bv = bias.values();
  std::vector<double> out(xv.size());
  std::vector<double> xhat(xv.size());
  std::vector<double> inv_std(outer * inner);
  const double dn = static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += xv[base + i * inner];
      m /= dn;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dlt = xv[base + i * inner] - m;
        var += dlt * dlt;
      }
      var /= dn;
      const double is = 1.0 / std::sqrt(var + epsilon);
      inv_std[o * inner + in] = is;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = base + i * inner;
        xhat[idx] = (xv[idx] - m) * is;
        out[idx] = gv[i] * xhat[idx] + bv[i];
      }
    }
  }
  return record("layer_norm", s, std::move(out), {x, gain, bias},
                [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
                  auto gv = self.input_value(1);
                  auto gx = self.input_grad(0), gg = self.input_grad(1), gb = self.input_grad(2);
                  const double* gy = self.grad.data();
                  for (std::size_t o = 0; o < outer; ++o) {
                    for (std::size_t in = 0; in < inner; ++in) {
                      const std::size_t base = o * n * inner + in;
                      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                      for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t idx = base + i * inner;
                        const double dxh = gy[idx] * gv[i];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xhat[idx];
                        if (!gg.empty()) gg[i] += gy[idx] * xhat[idx];
                        if (!gb.empty()) gb[i] += gy[idx];
                      }
                      if (gx.empty()) continue;
                      mean_dxh /= dn;
                      mean_dxh_xh /= dn;
                      const double is = inv_std[o * inner + in];
                      for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t idx = base + i * inner;
                        gx[idx] += is * (gy[idx] * gv[i] - mean_dxh - xhat[idx] * mean_dxh_xh);
                      }
                    }
                  }
                });
}

Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b) {
  expect_rank("dense", x, 1, "input");
  expect_rank("dense", W, 2, "weight");
  const std::size_t m = W.extent(0), n = W.extent(1);
  if (x.numel() != n) {
    throw ShapeError("dense: weight " + shape_str(W.shape()) + " cannot map input of width " +
                     std::to_string(x.numel()));
  }
  expect_bias("dense", b, m);
  auto xv = x.values(), wv = W.values();
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = wv.data() + i * n;
    double acc = b.defined() ? b[i] : 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  return record("dense", Shape{m}, std::move(out), {x, W, b.defined() ? b : Tensor()}, [m, n](detail::Node& self) {
    auto xv = self.input_value(0), wv = self.input_value(1);
    auto gx = self.input_grad(0), gw = self.input_grad(1);
    for (std::size_t i = 0; i < m; ++i) {
      const double g = self.grad[i];
      if (g == 0.0) continue;
      const double* row = wv.data() + i * n;
      if (!gx.empty()) {
        for (std::size_t j = 0; j < n; ++j) gx[j] += g * row[j];
      }
      if (!gw.empty()) {
        double* grow = gw.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) grow[j] += g * xv[j];
      }
    }
    if (self.inputs.size() > 2 && self.inputs[2]) {
      auto gb = self.input_grad(2);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i];
    }
  });
}

}  // namespace dpngan
