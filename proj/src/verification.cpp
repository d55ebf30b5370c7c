#include "dpngan/verification.hpp"

#include <chrono>
#include <iomanip>
#include <sstream>

#include "dpngan/activations.hpp"
#include "dpngan/deform.hpp"
#include "dpngan/discriminator.hpp"
#include "dpngan/dsp.hpp"
#include "dpngan/generator.hpp"
#include "dpngan/layers.hpp"
#include "dpngan/losses.hpp"
#include "dpngan/parameter.hpp"

namespace dpngan {
namespace {

using Clock = std::chrono::steady_clock;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

class SuiteRunner {
 public:
  SuiteRunner(SuiteResult& result, std::uint64_t seed, const std::function<void(const SuiteCase&)>& progress)
      : result_(result), seed_(seed), progress_(progress) {}

  void run(const std::string& name, const std::function<GradCheckReport(const GradCheckOptions&)>& check) {
    GradCheckOptions options;
    options.seed = mix_seed(seed_, result_.cases.size());
    const auto t0 = Clock::now();
    SuiteCase c{name, check(options), 0.0};
    c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result_.cases.push_back(c);
    if (progress_) progress_(result_.cases.back());
  }

  void inputs(const std::string& name, const MultiTensorFn& f, const std::vector<Tensor>& in) {
    run(name, [&](const GradCheckOptions& o) { return gradient_check(f, in, o); });
  }

 private:
  SuiteResult& result_;
  std::uint64_t seed_;
  const std::function<void(const SuiteCase&)>& progress_;
};

void operation_checks(SuiteRunner& s, Rng& rng) {
  const Tensor none;
  s.inputs("conv1d", [](const auto& v) { return conv1d(v[0], v[1], v[2], {2, 2, 3}); },
           {random_tensor({3, 17}, rng), random_tensor({4, 3, 3}, rng), random_tensor({4}, rng)});
  s.inputs("conv2d", [](const auto& v) { return conv2d(v[0], v[1], v[2], {2, 1, 1, 2}); },
           {random_tensor({2, 7, 6}, rng), random_tensor({3, 2, 3, 2}, rng), random_tensor({3}, rng)});
  s.inputs("transpose_conv1d", [](const auto& v) { return transpose_conv1d(v[0], v[1], v[2], 2); },
           {random_tensor({3, 6}, rng), random_tensor({3, 2, 4}, rng), random_tensor({2}, rng)});
  s.inputs("avg_pool1d", [](const auto& v) { return avg_pool1d(v[0], 3, 2); }, {random_tensor({2, 11}, rng)});
  s.inputs("max_pool2d", [](const auto& v) { return max_pool2d(v[0], 2, 2); }, {random_tensor({2, 6, 5}, rng)});
  s.inputs("layer_norm", [](const auto& v) { return layer_norm(v[0], 0, v[1], v[2]); },
           {random_tensor({4, 5}, rng), random_tensor({4}, rng), random_tensor({4}, rng)});
  s.inputs("layer_norm.axis1", [](const auto& v) { return layer_norm(v[0], 1, v[1], v[2]); },
           {random_tensor({3, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)});
  s.inputs("dense", [](const auto& v) { return dense(v[0], v[1], v[2]); },
           {random_tensor({5}, rng), random_tensor({3, 5}, rng), random_tensor({3}, rng)});
  s.inputs("tanh", [](const auto& v) { return tanh(v[0]); }, {random_tensor({7}, rng, -2, 2)});
  s.inputs("sigmoid", [](const auto& v) { return sigmoid(v[0]); }, {random_tensor({7}, rng, -2, 2)});
  s.inputs("silu", [](const auto& v) { return silu(v[0]); }, {random_tensor({7}, rng, -2, 2)});
  s.inputs("softplus", [](const auto& v) { return softplus(v[0]); }, {random_tensor({7}, rng, -3, 3)});

  s.inputs("spectral_filter.low_pass", [](const auto& v) { return spectral_filter(v[0], {0.7, FilterKind::low_pass}); },
           {random_tensor({2, 12}, rng)});
  s.inputs("spectral_filter.high_pass", [](const auto& v) { return spectral_filter(v[0], {1.3, FilterKind::high_pass}); },
           {random_tensor({13}, rng)});
  s.inputs("downsample", [](const auto& v) { return downsample(v[0], 2); }, {random_tensor({2, 11}, rng)});
  s.inputs("upsample", [](const auto& v) { return upsample(v[0], 2); }, {random_tensor({2, 6}, rng)});
  s.inputs("gaussian_kernel_smooth", [](const auto& v) { return gaussian_kernel_smooth(v[0], v[1]); },
           {random_tensor({2, 9}, rng), Tensor::vector({0.9})});
  s.inputs("gaussian_kernel_smooth.2d", [](const auto& v) { return gaussian_kernel_smooth(v[0], v[1]); },
           {random_tensor({2, 6, 3}, rng), Tensor::vector({1.4})});
  s.inputs("mel_spectrogram",
           [](const auto& v) { return mel_spectrogram(v[0], MelParams{8000, 32, 8, 4, 0.0, 0.0, 1e-6}); },
           {random_tensor({64}, rng)});

  s.inputs("linear_sample", [](const auto& v) { return linear_sample(v[0], v[1]); },
           {random_tensor({8}, rng), random_tensor({10}, rng, -0.9, 7.9)});
  s.inputs("deform_conv1d", [](const auto& v) { return deform_conv1d(v[0], v[1], v[2], v[3], {1, 2, 2}); },
           {random_tensor({2, 9}, rng), random_tensor({3, 9}, rng, -1.4, 1.4), random_tensor({3, 2, 3}, rng),
            random_tensor({3}, rng)});
  s.inputs("deform_conv1d.stride",
           [&none](const auto& v) { return deform_conv1d(v[0], v[1], v[2], none, {2, 1, 1}); },
           {random_tensor({2, 10}, rng), random_tensor({4, 5}, rng, -1.4, 1.4), random_tensor({2, 2, 4}, rng)});
  s.inputs("deform_conv1d.learned_offsets",
           [](const auto& v) { return deform_conv1d(v[0], DeformConvWeights{v[1], v[2], v[3], v[4]}, {1, 1, 1}); },
           {random_tensor({2, 8}, rng), random_tensor({3, 2, 3}, rng), random_tensor({3}, rng),
            random_tensor({3, 2, 3}, rng, -0.4, 0.4), random_tensor({3}, rng, -0.4, 0.4)});
  s.inputs("deform_conv2d", [](const auto& v) { return deform_conv2d(v[0], v[1], v[2], v[3], {1, 1, 1, 1}); },
           {random_tensor({2, 5, 4}, rng), random_tensor({18, 5, 4}, rng, -1.3, 1.3), random_tensor({2, 2, 3, 3}, rng),
            random_tensor({2}, rng)});
  s.inputs("deform_conv2d.learned_offsets",
           [](const auto& v) { return deform_conv2d(v[0], DeformConvWeights{v[1], v[2], v[3], v[4]}, {2, 1, 1, 0}); },
           {random_tensor({2, 6, 3}, rng), random_tensor({2, 2, 3, 1}, rng), random_tensor({2}, rng),
            random_tensor({6, 2, 3, 1}, rng, -0.4, 0.4), random_tensor({6}, rng, -0.4, 0.4)});
  s.inputs("psroi_pool1d", [](const auto& v) { return psroi_pool1d(v[0], 1, 7, 3); }, {random_tensor({6, 9}, rng)});
  s.inputs("psroi_pool2d", [](const auto& v) { return psroi_pool2d(v[0], Roi2d{0, 1, 5, 4}, 2); },
           {random_tensor({8, 5, 6}, rng)});
  s.inputs("psroi_layer.1d", [](const auto& v) { return psroi_layer(v[0], 3); }, {random_tensor({6, 8}, rng)});
  s.inputs("psroi_layer.2d", [](const auto& v) { return psroi_layer(v[0], 2); }, {random_tensor({8, 5, 4}, rng)});

  s.inputs("periodic_relu", [](const auto& v) { return periodic_relu(v[0]); }, {random_tensor({2, 8}, rng, -6, 6)});
  s.inputs("ada_prelu", [](const auto& v) { return ada_prelu(v[0], v[1]); },
           {random_tensor({3, 6}, rng, -6, 6), random_tensor({3}, rng, 0.2, 1.4)});
  s.inputs("prak", [](const auto& v) { return prak(v[0], v[1], v[2]); },
           {random_tensor({2, 7}, rng, -3, 3), random_tensor({2}, rng, 0.2, 1.4), Tensor::vector({0.8})});

  s.inputs("adv_loss_generator", [](const auto& v) { return adv_loss_generator({v[0], v[1]}); },
           {random_tensor({1}, rng, 0, 1), random_tensor({1}, rng, 0, 1)});
  s.inputs("adv_loss_discriminator", [](const auto& v) { return adv_loss_discriminator({v[0], v[1]}, {v[2], v[3]}); },
           {random_tensor({1}, rng, 0, 1), random_tensor({1}, rng, 0, 1), random_tensor({1}, rng, 0, 1),
            random_tensor({1}, rng, 0, 1)});
  s.inputs("feature_matching_loss", [](const auto& v) { return feature_matching_loss({v[0], v[1]}, {v[2], v[3]}); },
           {random_tensor({2, 5}, rng), random_tensor({4}, rng), random_tensor({2, 5}, rng), random_tensor({4}, rng)});
  const MelParams loss_mel{8000, 32, 8, 4, 0.0, 0.0, 1e-6};
  s.inputs("mel_loss", [&](const auto& v) { return mel_loss(v[0], v[1], loss_mel); },
           {random_tensor({64}, rng), random_tensor({64}, rng)});
  s.inputs("mel_loss_to_target", [&](const auto& v) { return mel_loss_to_target(v[0], v[1], loss_mel); },
           {random_tensor({4, 5}, rng, -8, 0), random_tensor({64}, rng)});
  s.inputs("generator_total", [](const auto& v) { return generator_total(v[0], v[1], v[2], {2.0, 45.0}); },
           {random_tensor({1}, rng), random_tensor({1}, rng), random_tensor({1}, rng)});
}

std::vector<Tensor> leaves_of(const ParameterSet& params) {
  std::vector<Tensor> out;
  for (const auto& p : params.items()) out.push_back(p.tensor);
  return out;
}

// Moves parameters off their initial values so that zero-initialised offsets,
// biases and unit gains do not hide gradient errors.
void randomize(ParameterSet& params, Rng& rng) {
  for (const auto& p : params.items()) {
    Tensor t = p.tensor;
    const bool offset = p.name.find(".offset.") != std::string::npos;
    for (auto& v : t.mutable_values()) v += offset ? rng.uniform(-0.05, 0.05) : rng.uniform(-0.1, 0.1);
  }
}

void model_checks(SuiteRunner& s, const Config& base, Rng& rng) {
  const Config mini = miniature_config(base);
  {
    Generator gen(mini.generator, mini.audio, rng.next_u64());
    randomize(gen.parameters(), rng);
    const Tensor mel = random_tensor({mini.audio.n_mels, mini.audio.frames()}, rng, -6.0, 0.0);
    const Tensor meta = random_tensor({mini.generator.meta_width}, rng, 0.0, 1.0);
    s.run("generator", [&](const GradCheckOptions& o) {
      return check_leaves([&] { return gen.forward(mel, meta); }, leaves_of(gen.parameters()), o);
    });
    s.inputs("generator.inputs", [&](const auto& v) { return gen.forward(v[0], v[1]); }, {mel, meta});
  }
  {
    Discriminator disc(mini.discriminator, 256, rng.next_u64());
    randomize(disc.parameters(), rng);
    const Tensor wave = random_tensor({256}, rng, -0.8, 0.8);
    const Tensor other = random_tensor({256}, rng, -0.8, 0.8);
    s.run("discriminator", [&](const GradCheckOptions& o) {
      return check_leaves(
          [&] {
            const DiscriminatorOutput out = disc.forward(wave);
            std::vector<Tensor> parts{out.score};
            for (const auto& tap : out.taps) parts.push_back(flatten(tap));
            return concat(parts);
          },
          leaves_of(disc.parameters()), o);
    });
    s.inputs("discriminator.input", [&](const auto& v) { return disc.forward(v[0]).score; }, {wave});
    s.inputs("discriminator.losses",
             [&](const auto& v) {
               const DiscriminatorOutput real = disc.forward(v[0]);
               const DiscriminatorOutput fake = disc.forward(v[1]);
               const Tensor adv = adv_loss_generator({fake.score});
               const Tensor fm = feature_matching_loss(real.taps, fake.taps);
               return add(adv, add(fm, adv_loss_discriminator({real.score}, {fake.score})));
             },
             {wave, other});
  }
}

}  // namespace

bool SuiteResult::passed() const {
  for (const auto& c : cases) {
    if (!c.report.passed) return false;
  }
  return !cases.empty();
}

std::vector<std::string> SuiteResult::failures() const {
  std::vector<std::string> out;
  for (const auto& c : cases) {
    if (!c.report.passed) out.push_back(c.name);
  }
  return out;
}

std::string SuiteResult::table() const {
  std::ostringstream os;
  os << std::left << std::setw(34) << "operation" << std::right << std::setw(9) << "checked" << std::setw(7) << "kinks"
     << std::setw(14) << "max rel err" << "  status\n";
  for (const auto& c : cases) {
    os << std::left << std::setw(34) << c.name << std::right << std::setw(9) << c.report.checked << std::setw(7)
       << c.report.kinks << std::setw(14) << std::scientific << std::setprecision(3) << c.report.max_relative_error
       << std::defaultfloat << "  " << (c.report.passed ? "ok" : "FAIL");
    if (!c.report.passed) os << "  (" << c.report.worst << ')';
    os << '\n';
  }
  os << std::fixed << std::setprecision(1) << "suite time " << seconds << " s\n";
  return os.str();
}

Config miniature_config(const Config& base) {
  Config c = base;
  c.audio.sample_rate = 8000;
  c.audio.n_fft = 32;
  c.audio.hop = 8;
  c.audio.n_mels = 4;
  c.audio.f_min = 0.0;
  c.audio.f_max = 0.0;
  c.audio.output_length = 64;

  auto& g = c.generator;
  g.init_channels = 2;
  g.init_kernel = 3;
  g.meta_width = 12;
  g.meta_hidden = 3;
  g.upscale_kernel = 4;
  g.dpn_depth = 2;
  g.dpn_channels = 3;
  g.block_kernel = 3;
  g.psroi_bins = 2;
  g.out_channels = 3;

  auto& d = c.discriminator;
  d.periods = {2, 3};
  d.kernels = {3, 5};
  d.depth = 2;
  d.msd_channels = 3;
  d.mcd_channels = 3;
  d.pool_kernel = 4;
  d.pool_stride = 2;
  d.final_stride = 2;
  d.msd_psroi_bins = 2;
  d.mcd_psroi_bins = 2;
  d.hidden = 3;
  return c;
}

SuiteResult run_gradient_suite(const Config& base, std::uint64_t seed,
                               const std::function<void(const SuiteCase&)>& progress) {
  SuiteResult result;
  SuiteRunner runner(result, seed, progress);
  Rng rng(mix_seed(seed, 0x6772));
  const auto t0 = Clock::now();
  operation_checks(runner, rng);
  model_checks(runner, base, rng);
  result.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return result;
}

SuiteResult run_model_checks(const Config& base, std::uint64_t seed,
                             const std::function<void(const SuiteCase&)>& progress) {
  SuiteResult result;
  SuiteRunner runner(result, seed, progress);
  Rng rng(mix_seed(seed, 0x6d6f));
  const auto t0 = Clock::now();
  model_checks(runner, base, rng);
  result.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return result;
}

}  // namespace dpngan
