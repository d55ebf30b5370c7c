#include "dpngan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpngan/config.hpp"
#include "dpngan/data.hpp"
#include "dpngan/dsp.hpp"
#include "dpngan/error.hpp"
#include "dpngan/metrics.hpp"
#include "dpngan/tensor.hpp"
#include "dpngan/training.hpp"
#include "dpngan/verification.hpp"
#include "dpngan/wav.hpp"

namespace dpngan {
namespace {

namespace fs = std::filesystem;

// Raised for checks whose failure is a validation outcome (exit 1).
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

struct ConfigOptions {
  std::string profile = "small";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_scale;
  std::vector<std::string> ablate;
  std::vector<std::string> set;

  void attach(CLI::App& cmd) {
    cmd.add_option("--profile", profile, "Built-in profile: small, large or toy")
        ->check(CLI::IsMember({"small", "large", "toy"}))
        ->capture_default_str();
    cmd.add_option("--config", config_path, "Configuration file applied on top of the profile")
        ->check(CLI::ExistingFile);
    cmd.add_option("--seed", seed, "Override train.seed");
    cmd.add_option("--noise-scale", noise_scale, "Override data.noise_scale (Gaussian perturbation of the corpus)");
    cmd.add_option("--ablate", ablate, "Comma-separated ablation switches: " + join(ablation_names()))
        ->delimiter(',');
    cmd.add_option("--set", set, "Override any configuration field as key=value (repeatable)");
  }

  Config resolve() const {
    Config c = load_profile(profile);
    if (!config_path.empty()) c = load_config(config_path, c);
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "expected key=value");
      set_field(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) c.train.seed = *seed;
    if (noise_scale) c.data.noise_scale = *noise_scale;
    for (const auto& name : ablate) {
      try {
        apply_ablation(c, name);
      } catch (const ValueError& e) {
        throw ConfigError("--ablate", e.what());
      }
    }
    validate(c);
    return c;
  }

  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
    return s;
  }
};

std::vector<double> fit_length(std::vector<double> x, std::size_t length) {
  x.resize(length, 0.0);
  return x;
}

AudioClip load_at_rate(const fs::path& path, int rate) {
  AudioClip clip = read_wav(path);
  if (clip.sample_rate != rate) {
    clip.samples = resample(clip.samples, clip.sample_rate, rate);
    clip.sample_rate = rate;
  }
  return clip;
}

std::vector<fs::path> wav_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path().filename());
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_gradcheck(const ConfigOptions& opts, const std::string& corrupt_op, std::ostream& out, std::ostream& err) {
  const Config config = opts.resolve();
  static std::string corrupted;
  if (!corrupt_op.empty()) {
    corrupted = corrupt_op;
    set_corrupted_backward(corrupted.c_str());
  }
  const SuiteResult result = run_gradient_suite(config, config.train.seed);
  if (!corrupt_op.empty()) set_corrupted_backward(nullptr);
  out << result.table();
  if (!result.passed()) {
    err << "gradient check failed for: " << ConfigOptions::join(result.failures()) << '\n';
    return kExitValidation;
  }
  out << "all " << result.cases.size() << " checks passed\n";
  return kExitOk;
}

int cmd_train(const ConfigOptions& opts, const std::string& resume, std::optional<std::size_t> steps,
              const std::string& out_dir, std::size_t log_every, std::ostream& out) {
  std::unique_ptr<Trainer> trainer;
  auto adjust = [&](Config& c) {
    if (steps) c.train.max_steps = *steps;
    if (!out_dir.empty()) c.train.out_dir = out_dir;
  };
  if (!resume.empty()) {
    Config stored = read_checkpoint_config(resume);
    trainer = Trainer::resume(resume, load_training_corpus(stored), adjust);
  } else {
    Config config = opts.resolve();
    adjust(config);
    validate(config);
    trainer = std::make_unique<Trainer>(config, load_training_corpus(config));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t total = trainer->total_steps();
  out << "training " << trainer->config().profile << " profile from step " << trainer->step() << " to " << total
      << " (" << trainer->split().train.size() << " training clips)\n";
  trainer->fit([&](const LossRecord& r) {
    if (log_every > 0 && (r.step % log_every == 0 || r.step == total)) {
      out << "step " << r.step << '/' << total << std::fixed << std::setprecision(4) << "  adv_g " << r.adv_g
          << "  adv_d " << r.adv_d << "  fm " << r.fm << "  mel " << r.mel << "  total " << r.total << std::defaultfloat
          << '\n';
    }
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "done in " << std::fixed << std::setprecision(1) << secs << " s; outputs in " << trainer->config().train.out_dir
      << '\n';
  return kExitOk;
}

int cmd_synth(const std::string& checkpoint, const std::string& mel_path, const std::string& wav_path, int class_id,
              int speaker_id, const std::vector<double>& scalars, const std::string& out_path, std::ostream& out) {
  if (mel_path.empty() == wav_path.empty()) throw ValidationFailure("synth: give exactly one of --mel or --wav");
  LoadedGenerator loaded = load_generator(checkpoint);
  const AudioConfig& audio = loaded.config.audio;
  const MelParams params = audio.mel_params();
  MelSpectrogram mel;
  if (!wav_path.empty()) {
    const AudioClip clip = load_at_rate(wav_path, audio.sample_rate);
    mel = mel_spectrogram(fit_length(clip.samples, audio.output_length), params);
  } else {
    mel = read_mel_dump(mel_path);
    if (mel.n_mels != audio.n_mels || mel.n_frames != audio.frames()) {
      throw ShapeError("synth: mel dump is " + std::to_string(mel.n_mels) + "x" + std::to_string(mel.n_frames) +
                       ", the checkpoint expects " + std::to_string(audio.n_mels) + "x" + std::to_string(audio.frames()));
    }
  }
  ClipAttributes attributes{class_id, speaker_id, scalars};
  const Tensor meta = Tensor::vector(encode_metadata(attributes, loaded.config.generator.meta_width));
  Tensor wave;
  {
    NoGradGuard no_grad;
    wave = loaded.generator->forward(mel.as_tensor(), meta);
  }
  AudioClip clip{std::vector<double>(wave.values().begin(), wave.values().end()), audio.sample_rate};
  write_wav(out_path, clip);
  out << "wrote " << clip.samples.size() << " samples at " << clip.sample_rate << " Hz to " << out_path << '\n';
  return kExitOk;
}

int cmd_eval(const ConfigOptions& opts, const std::string& reference_dir, const std::string& degraded_dir,
             const std::string& out_path, std::ostream& out) {
  const Config config = opts.resolve();
  const auto refs = wav_names(reference_dir);
  const auto degs = wav_names(degraded_dir);
  MetricReport report;
  report.params.mel = config.audio.mel_params();
  for (const auto& name : refs) {
    if (!std::binary_search(degs.begin(), degs.end(), name)) {
      warn("eval: " + name.string() + " has no degraded counterpart; skipped");
      continue;
    }
    const int rate = config.audio.sample_rate;
    report.rows.push_back(evaluate_pair(name.string(), load_at_rate(fs::path(reference_dir) / name, rate),
                                        load_at_rate(fs::path(degraded_dir) / name, rate), report.params));
  }
  for (const auto& name : degs) {
    if (!std::binary_search(refs.begin(), refs.end(), name)) {
      warn("eval: " + name.string() + " has no reference counterpart; skipped");
    }
  }
  if (report.rows.empty()) throw ValidationFailure("eval: no paired .wav files found");
  if (out_path.empty()) {
    report.write_csv(out);
  } else {
    report.write_csv(fs::path(out_path));
    out << "wrote " << out_path << '\n';
  }
  out << report.summary_text();
  return kExitOk;
}

int cmd_inspect_mel(const ConfigOptions& opts, const std::string& wav_path, const std::string& prefix,
                    std::ostream& out) {
  const Config config = opts.resolve();
  const AudioClip clip = load_at_rate(wav_path, config.audio.sample_rate);
  std::vector<double> samples = clip.samples;
  if (samples.size() < config.audio.n_fft) samples.resize(config.audio.n_fft, 0.0);
  const MelSpectrogram mel = mel_spectrogram(samples, config.audio.mel_params());
  const fs::path dump = prefix + ".mel";
  const fs::path image = prefix + ".pgm";
  write_mel_dump(dump, mel);
  write_mel_pgm(image, mel);
  out << "wrote " << dump.string() << " and " << image.string() << " (" << mel.n_mels << " mels x " << mel.n_frames
      << " frames)\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deformable periodic network GAN vocoder: verification, training, synthesis and evaluation"};
  app.require_subcommand(1);

  ConfigOptions grad_opts, train_opts, eval_opts, mel_opts;

  auto* gradcheck = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite and print the error table");
  grad_opts.attach(*gradcheck);
  std::string corrupt_op;
  gradcheck->add_option("--corrupt-op", corrupt_op, "Scale the backward pass of the named op (test hook)")
      ->group("");

  auto* train = app.add_subcommand("train", "Train generator and discriminator; writes checkpoints and train_log.csv");
  train_opts.attach(*train);
  std::string resume, out_dir;
  std::optional<std::size_t> steps;
  std::size_t log_every = 10;
  train->add_option("--resume", resume, "Continue from a checkpoint (its stored configuration is used)")
      ->check(CLI::ExistingFile);
  train->add_option("--steps", steps, "Override train.max_steps");
  train->add_option("--out-dir", out_dir, "Override train.out_dir");
  train->add_option("--log-every", log_every, "Print losses every N steps (0 disables)")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a waveform from a checkpoint and a mel dump or WAV file");
  std::string checkpoint, mel_path, wav_path, synth_out;
  int class_id = -1, speaker_id = -1;
  std::vector<double> scalars;
  synth->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  synth->add_option("--mel", mel_path, "DPN-MEL dump to condition on")->check(CLI::ExistingFile);
  synth->add_option("--wav", wav_path, "WAV file whose mel-spectrogram conditions the generator")
      ->check(CLI::ExistingFile);
  synth->add_option("--class", class_id, "Class label (-1 for unknown)")->capture_default_str();
  synth->add_option("--speaker", speaker_id, "Speaker id (-1 for unknown)")->capture_default_str();
  synth->add_option("--scalar", scalars, "Scalar metadata attribute (repeatable, at most 8)");
  synth->add_option("--out", synth_out, "Output WAV path")->required();

  auto* eval = app.add_subcommand("eval", "Compare same-named WAV files of two directories; writes a metric CSV");
  eval_opts.attach(*eval);
  std::string reference_dir, degraded_dir, eval_out;
  eval->add_option("--reference", reference_dir, "Directory of reference WAV files")->required();
  eval->add_option("--degraded", degraded_dir, "Directory of degraded or generated WAV files")->required();
  eval->add_option("--out", eval_out, "CSV report path (default: standard output)");

  auto* inspect = app.add_subcommand("inspect-mel", "Write the DPN-MEL dump and a PGM image of a WAV file");
  mel_opts.attach(*inspect);
  std::string inspect_wav, prefix;
  inspect->add_option("wav", inspect_wav, "Input WAV file")->required()->check(CLI::ExistingFile);
  inspect->add_option("--out-prefix", prefix, "Writes <prefix>.mel and <prefix>.pgm")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitRuntime;
  }

  const WarningHandler previous = set_warning_handler([&err](const std::string& msg) { err << "warning: " << msg << '\n'; });
  struct Restore {
    const WarningHandler& handler;
    ~Restore() { set_warning_handler(handler); }
  } restore{previous};

  try {
    if (*gradcheck) return cmd_gradcheck(grad_opts, corrupt_op, out, err);
    if (*train) return cmd_train(train_opts, resume, steps, out_dir, log_every, out);
    if (*synth) return cmd_synth(checkpoint, mel_path, wav_path, class_id, speaker_id, scalars, synth_out, out);
    if (*eval) return cmd_eval(eval_opts, reference_dir, degraded_dir, eval_out, out);
    if (*inspect) return cmd_inspect_mel(mel_opts, inspect_wav, prefix, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration field " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace dpngan
