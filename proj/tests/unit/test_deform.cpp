#include <doctest.h>

#include <cmath>

#include "dpngan/deform.hpp"
#include "dpngan/error.hpp"
#include "dpngan/gradcheck.hpp"
#include "test_support.hpp"

using namespace dpngan;
using namespace dpngan::testing;

TEST_CASE("linear_sample") {
  const std::vector<double> x = {1, 3, 4, 8, 2};
  CHECK(linear_sample(x, 3.0) == 8.0);
  CHECK(linear_sample(x, 2.25) == 0.75 * 4 + 0.25 * 8);
  CHECK(linear_sample(x, -2.0) == 0.0);
  CHECK(linear_sample(x, 5.5) == 0.0);
  for (int i = 0; i <= 40; ++i) {
    const double p = -1.5 + 0.17 * i;
    CHECK(std::abs(linear_sample(x, p) - ref_sample(x, p)) < 1e-14);
    CHECK(std::abs(linear_sample(std::vector<double>(6, 2.0), 0.1 * i * 5 / 4) - 2.0) < 1e-14);
  }
}

TEST_CASE("conv grid") {
  CHECK(conv_grid(3) == std::vector<long>{-1, 0, 1});
  CHECK(conv_grid(1) == std::vector<long>{0});
  CHECK(conv_grid(5).size() == 5);
}

TEST_CASE("deform_conv1d: zero offsets equal conv1d, injected shifts match brute force") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t ci = 2, co = 3, len = 10, k = 3;
    const Tensor x = random_tensor({ci, len}, seed);
    const Tensor w = random_tensor({co, ci, k}, seed + 1000);
    const Tensor b = random_tensor({co}, seed + 2000);
    const Conv1dOptions opt{1 + seed % 2, 1, 1};
    const Tensor plain = conv1d(x, w, b, opt);
    const std::size_t out = plain.extent(1);
    CHECK(max_abs_diff(deform_conv1d(x, Tensor(Shape{k, out}), w, b, opt).values(), plain.values()) < 1e-12);
    for (double shift : {1.0, 0.5, -0.3}) {
      const Tensor y = deform_conv1d(x, Tensor(Shape{k, out}, shift), w, {}, opt);
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t t = 0; t < out; ++t) {
          double s = 0.0;
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t j = 0; j < k; ++j) {
              const double p = double(t * opt.stride) - double(opt.padding) + double(j) + shift;
              s += w.values()[(o * ci + c) * k + j] * ref_sample(x.values().subspan(c * len, len), p);
            }
          CHECK(std::abs(y.values()[o * out + t] - s) < 1e-10);
        }
    }
  }
}

TEST_CASE("deform_conv1d with an offset network starting at zero equals conv1d") {
  const Tensor x = random_tensor({2, 12}, 4);
  DeformConvWeights dw{random_tensor({3, 2, 5}, 5), random_tensor({3}, 6), Tensor(Shape{5, 2, 5}), Tensor(Shape{5})};
  CHECK(max_abs_diff(deform_conv1d(x, dw, {1, 1, 2}).values(), conv1d(x, dw.weight, dw.bias, {1, 1, 2}).values()) <
        1e-12);
  CHECK_THROWS_AS(deform_conv1d(x, Tensor(Shape{2, 12}), dw.weight, dw.bias, {1, 1, 2}), ShapeError);
}

TEST_CASE("deform_conv2d: zero offsets, integer and fractional shifts") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t ci = 2, co = 2, h = 5, wd = 6, k = 3;
    const Tensor x = random_tensor({ci, h, wd}, seed);
    const Tensor w = random_tensor({co, ci, k, k}, seed + 300);
    const Conv2dOptions opt{1, 1, 1, 1};
    const Tensor plain = conv2d(x, w, {}, opt);
    const std::size_t ho = plain.extent(1), wo = plain.extent(2);
    CHECK(max_abs_diff(deform_conv2d(x, Tensor(Shape{2 * k * k, ho, wo}), w, {}, opt).values(), plain.values()) <
          1e-12);
    for (auto [dy, dx] : {std::pair{1.0, 0.0}, std::pair{0.5, 0.5}, std::pair{-0.25, 0.75}}) {
      Tensor off(Shape{2 * k * k, ho, wo});
      auto ov = off.mutable_values();
      for (std::size_t tap = 0; tap < k * k; ++tap)
        for (std::size_t i = 0; i < ho * wo; ++i) {
          ov[(2 * tap) * ho * wo + i] = dy;
          ov[(2 * tap + 1) * ho * wo + i] = dx;
        }
      const Tensor y = deform_conv2d(x, off, w, {}, opt);
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t r = 0; r < ho; ++r)
          for (std::size_t c = 0; c < wo; ++c) {
            double s = 0.0;
            for (std::size_t ch = 0; ch < ci; ++ch)
              for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b)
                  s += w.values()[((o * ci + ch) * k + a) * k + b] *
                       ref_sample2d(x.values().subspan(ch * h * wd, h * wd), h, wd, double(r) - 1.0 + a + dy,
                                    double(c) - 1.0 + b + dx);
            CHECK(std::abs(y.values()[(o * ho + r) * wo + c] - s) < 1e-10);
          }
    }
  }
}

TEST_CASE("integer row offset equals conv2d on the row-shifted map") {
  const std::size_t h = 6, wd = 5;
  const Tensor x = random_tensor({1, h, wd}, 9);
  const Tensor w = random_tensor({1, 1, 3, 3}, 10);
  Tensor off(Shape{18, h - 2, wd - 2});
  for (std::size_t tap = 0; tap < 9; ++tap)
    for (std::size_t i = 0; i < (h - 2) * (wd - 2); ++i) off.mutable_values()[2 * tap * (h - 2) * (wd - 2) + i] = 1.0;
  std::vector<double> shifted(h * wd, 0.0);
  for (std::size_t r = 0; r + 1 < h; ++r)
    for (std::size_t c = 0; c < wd; ++c) shifted[r * wd + c] = x.values()[(r + 1) * wd + c];
  const Tensor expect = conv2d(Tensor(Shape{1, h, wd}, shifted), w, {});
  CHECK(max_abs_diff(deform_conv2d(x, off, w, {}).values(), expect.values()) < 1e-12);
}

TEST_CASE("psroi_pool1d") {
  const Tensor x(Shape{2, 4}, {1, 2, 3, 4, 10, 20, 30, 40});
  const Tensor y = psroi_pool1d(x, 0, 4, 2);
  CHECK(y.shape() == Shape{1, 2});
  CHECK(y[0] == (1.0 + 2.0) / 2);
  CHECK(y[1] == (30.0 + 40.0) / 2);
  CHECK_THROWS(psroi_pool1d(Tensor(Shape{4, 3}, 1.0), 0, 3, 4));
  CHECK_THROWS(psroi_pool1d(Tensor(Shape{3, 8}, 1.0), 0, 8, 2));
  for (const Tensor p = psroi_pool1d(Tensor(Shape{4, 9}, 0.7), 2, 6, 2); double v : p.values()) CHECK(std::abs(v - 0.7) < 1e-15);
}

TEST_CASE("psroi_pool2d quadrant means") {
  const Tensor x = random_tensor({4, 4, 4}, 2);
  const Tensor y = psroi_pool2d(x, {0, 0, 4, 4}, 2);
  CHECK(y.shape() == Shape{1, 2, 2});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t r = 2 * i; r < 2 * i + 2; ++r)
        for (std::size_t c = 2 * j; c < 2 * j + 2; ++c) s += x.values()[((i * 2 + j) * 4 + r) * 4 + c];
      CHECK(std::abs(y[i * 2 + j] - s / 4) < 1e-12);
    }
  CHECK_THROWS(psroi_pool2d(Tensor(Shape{3, 4, 4}), {0, 0, 4, 4}, 2));
}

TEST_CASE("psroi_layer broadcast") {
  const Tensor g = psroi_layer(Tensor(Shape{2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 1);
  CHECK(g.shape() == Shape{2, 5});
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(g[t] == 3.0);
    CHECK(g[5 + t] == 8.0);
  }
  const Tensor h = psroi_layer(Tensor(Shape{2, 4}, {1, 2, 3, 4, 10, 20, 30, 40}), 2);
  CHECK(std::vector<double>(h.values().begin(), h.values().end()) == std::vector<double>{1.5, 1.5, 35, 35});
  Tensor x = random_tensor({2, 4}, 3);
  x.set_requires_grad(true);
  backward(sum(psroi_layer(x, 2)));
  // Each pooled position receives 1/n per broadcast copy: n copies of 1/n = 1 for covered positions.
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 0, 0, 0, 0, 1, 1});
  CHECK(gradient_check([](const Tensor& v) { return psroi_layer(v, 2); }, random_tensor({4, 6}, 1)).passed);
}

TEST_CASE("deformable ops pass the gradient check away from integer sample points") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor off = random_tensor({3, 8}, seed + 40, -0.8, 0.8);
    for (auto& v : off.mutable_values())
      if (std::abs(v - std::round(v)) < 1e-2) v += 3e-2;
    const auto r = gradient_check(
        [](const std::vector<Tensor>& in) { return deform_conv1d(in[0], in[1], in[2], in[3], {1, 1, 1}); },
        {random_tensor({2, 8}, seed), off, random_tensor({2, 2, 3}, seed + 1), random_tensor({2}, seed + 2)},
        {.seed = seed});
    CHECK(r.passed);
    Tensor pos = random_tensor({6}, seed + 7, -0.5, 5.5);
    for (auto& v : pos.mutable_values())
      if (std::abs(v - std::round(v)) < 1e-2) v += 3e-2;
    CHECK(gradient_check([](const std::vector<Tensor>& in) { return linear_sample(in[0], in[1]); },
                         {random_tensor({6}, seed), pos}, {.seed = seed})
              .passed);
  }
}
