#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpngan/error.hpp"
#include "dpngan/generator.hpp"
#include "dpngan/gradcheck.hpp"
#include "dpngan/verification.hpp"
#include "test_support.hpp"

using namespace dpngan;
using namespace dpngan::testing;

namespace {
Config mini() { return miniature_config(Config{}); }

Tensor mel_input(const AudioConfig& a, std::uint64_t seed) {
  return random_tensor({a.n_mels, a.frames()}, seed, -3.0, 0.0);
}
}  // namespace

TEST_CASE("mel initiator shape at the published scale") {
  Config c;  // defaults: 128 mel bands, 32 initial channels
  c.generator.dpn_depth = 1;
  c.generator.dpn_channels = 4;
  c.generator.meta_hidden = 4;
  c.audio.output_length = 256 * 99 + 1024;  // 100 frames
  const Generator g(c.generator, c.audio, 0);
  REQUIRE(c.audio.frames() == 100);
  const Tensor f = g.mel_initiator(random_tensor({1, 128, 100}, 1));
  CHECK(f.shape() == Shape{32 * 64, 50});
}

TEST_CASE("metadata initiator width, zero input and ablation") {
  Config c = mini();
  const Generator g(c.generator, c.audio, 3);
  const Tensor zero_meta(Shape{c.generator.meta_width});
  const Tensor a = g.metadata_initiator(zero_meta);
  CHECK(a.shape() == Shape{c.generator.meta_hidden});
  // Zero input leaves only the biases: same result as any other zero vector.
  CHECK(max_abs_diff(a.values(), g.metadata_initiator(Tensor(Shape{c.generator.meta_width})).values()) == 0.0);
  CHECK_THROWS_AS(g.metadata_initiator(Tensor(Shape{c.generator.meta_width + 1})), ShapeError);
  apply_ablation(c, "use_metadata");
  const Generator h(c.generator, c.audio, 3);
  const Tensor z = h.metadata_initiator(random_tensor({c.generator.meta_width}, 2));
  CHECK(z.shape() == Shape{c.generator.meta_hidden});
  for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("small profile metadata width 152 maps to 64") {
  const Config c = load_profile("small");
  CHECK(c.generator.meta_width == 152);
  CHECK(c.generator.meta_hidden == 64);
  CHECK(c.audio.output_length == 47749);
}

TEST_CASE("fuse and upscale doubles the time extent") {
  const Config c = mini();
  const Generator g(c.generator, c.audio, 1);
  const Tensor mf = g.mel_initiator(mel_input(c.audio, 1));
  const Tensor up = g.fuse_and_upscale(mf, g.metadata_initiator(random_tensor({c.generator.meta_width}, 2)));
  CHECK(up.shape() == Shape{c.generator.dpn_channels, 2 * mf.extent(1)});
  const auto r = gradient_check(
      [&](const std::vector<Tensor>& in) { return g.fuse_and_upscale(in[0], in[1]); },
      {random_tensor(mf.shape(), 4), random_tensor({c.generator.meta_hidden}, 5)});
  CHECK(r.passed);
}

TEST_CASE("dpn layers preserve shape and the module sums a residual ladder") {
  Config c = mini();
  c.generator.dpn_depth = 1;
  const Generator one(c.generator, c.audio, 7);
  const Tensor x = random_tensor({c.generator.dpn_channels, 6}, 3);
  const Tensor y = one.dpn_layer(0, x);
  CHECK(y.shape() == x.shape());
  for (double v : y.values()) CHECK(std::isfinite(v));
  CHECK(max_abs_diff(one.dpn_module(x).values(), y.values()) == 0.0);
  // Odd extents are padded internally and cropped back.
  CHECK(one.dpn_layer(0, random_tensor({c.generator.dpn_channels, 5}, 3)).shape() ==
        Shape{c.generator.dpn_channels, 5});
  c.generator.dpn_depth = 3;
  const Generator three(c.generator, c.audio, 7);
  // Each layer reads the running sum of its input and output; the module
  // returns the sum of the layer outputs.
  const Tensor o1 = three.dpn_layer(0, x);
  const Tensor in2 = add(x, o1);
  const Tensor o2 = three.dpn_layer(1, in2);
  const Tensor o3 = three.dpn_layer(2, add(in2, o2));
  CHECK(max_abs_diff(three.dpn_module(x).values(), add(add(o1, o2), o3).values()) < 1e-12);
}

TEST_CASE("generator forward: length, range, determinism") {
  const Config c = mini();
  const Generator g(c.generator, c.audio, 11);
  const Tensor mel = mel_input(c.audio, 1);
  const Tensor meta = random_tensor({c.generator.meta_width}, 2, 0, 1);
  const Tensor y = g.forward(mel, meta);
  CHECK(y.shape() == Shape{c.audio.output_length});
  for (double v : y.values()) CHECK(std::abs(v) <= 1.0);
  CHECK(max_abs_diff(y.values(), g.forward(mel, meta).values()) == 0.0);
  const Generator same(c.generator, c.audio, 11);
  CHECK(max_abs_diff(y.values(), same.forward(mel, meta).values()) == 0.0);
  CHECK_THROWS_AS(g.forward(random_tensor({c.audio.n_mels + 1, c.audio.frames()}, 1), meta), ShapeError);
}

TEST_CASE("zero offset networks make the deformable generator equal its plain twin") {
  Config c = mini();
  const Generator deform(c.generator, c.audio, 5);
  c.generator.use_deform = false;
  Generator plain(c.generator, c.audio, 5);
  CHECK(plain.parameters().size() < deform.parameters().size());
  CHECK(plain.parameters().assign_from(deform.parameters()) == plain.parameters().size());
  const Tensor mel = mel_input(c.audio, 8);
  const Tensor meta = random_tensor({c.generator.meta_width}, 9, 0, 1);
  CHECK(max_abs_diff(deform.forward(mel, meta).values(), plain.forward(mel, meta).values()) < 1e-10);
}

TEST_CASE("ablations keep the output shape") {
  for (const char* name : {"use_dpn", "use_prak", "use_deform", "use_psroi", "use_metadata"}) {
    Config c = mini();
    apply_ablation(c, name);
    const Generator g(c.generator, c.audio, 2);
    CHECK(g.forward(mel_input(c.audio, 1), Tensor(Shape{c.generator.meta_width})).shape() ==
          Shape{c.audio.output_length});
  }
}

TEST_CASE("miniature generator passes the gradient check for all parameters") {
  const SuiteResult r = run_model_checks(mini(), 0);
  for (const auto& sc : r.cases) {
    if (sc.name.rfind("generator", 0) != 0) continue;
    INFO(sc.name << " " << sc.report.worst);
    CHECK(sc.report.passed);
  }
}
