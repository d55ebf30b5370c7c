#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpngan/cli.hpp"
#include "dpngan/config.hpp"
#include "dpngan/data.hpp"
#include "dpngan/dsp.hpp"
#include "dpngan/verification.hpp"
#include "dpngan/wav.hpp"
#include "test_support.hpp"

using namespace dpngan;
using namespace dpngan::testing;
namespace fs = std::filesystem;

namespace {
struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "dpngan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpngan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A miniature training setup written as a configuration file.
fs::path tiny_config(const fs::path& dir) {
  Config c = miniature_config(load_profile("toy"));
  c.generator.meta_width = meta_layout::kWidth;
  c.data.n_items = 8;
  c.data.train_fraction = 0.6;
  c.data.validation_fraction = 0.2;
  c.data.test_fraction = 0.2;
  c.train.batch_size = 2;
  c.train.max_steps = 2;
  c.train.checkpoint_interval = 2;
  c.train.out_dir = (dir / "run").string();
  std::ofstream(dir / "tiny.cfg") << to_text(c);
  return dir / "tiny.cfg";
}

std::vector<char> bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}
}  // namespace

TEST_CASE("usage and configuration errors") {
  CHECK(run({"gradcheck", "--profile", "huge"}).code == kExitRuntime);
  CHECK(run({}).code == kExitRuntime);
  const Outcome bad = run({"train", "--profile", "toy", "--set", "generator.dpn_depth=0"});
  CHECK(bad.code == kExitValidation);
  CHECK(bad.err.find("generator.dpn_depth") != std::string::npos);
  const Outcome unknown = run({"train", "--profile", "toy", "--set", "generator.wings=2"});
  CHECK(unknown.code == kExitValidation);
  CHECK(unknown.err.find("generator.wings") != std::string::npos);
  CHECK(run({"train", "--profile", "toy", "--ablate", "use_wings"}).code == kExitValidation);
}

TEST_CASE("gradcheck exit codes") {
  const Outcome ok = run({"gradcheck", "--profile", "toy"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("deform_conv1d") != std::string::npos);
  const Outcome bad = run({"gradcheck", "--profile", "toy", "--corrupt-op", "deform_conv1d"});
  CHECK(bad.code == kExitValidation);
  CHECK(bad.err.find("deform_conv1d") != std::string::npos);
}

TEST_CASE("train, synth and resume") {
  const fs::path dir = scratch("train");
  const fs::path cfg = tiny_config(dir);
  const Outcome t = run({"train", "--profile", "toy", "--config", cfg.string(), "--log-every", "1"});
  INFO(t.err);
  REQUIRE(t.code == kExitOk);
  const fs::path ckpt = dir / "run" / "checkpoint_000002.dpng";
  REQUIRE(fs::exists(ckpt));
  CHECK(fs::exists(dir / "run" / "train_log.csv"));

  const Config c = load_config(cfg, load_profile("toy"));
  AudioClip src{random_values(c.audio.output_length, 3, -0.5, 0.5), c.audio.sample_rate};
  write_wav(dir / "src.wav", src);
  const std::string out1 = (dir / "a.wav").string(), out2 = (dir / "b.wav").string();
  REQUIRE(run({"synth", "--checkpoint", ckpt.string(), "--wav", (dir / "src.wav").string(), "--class", "3", "--out", out1})
              .code == kExitOk);
  REQUIRE(run({"synth", "--checkpoint", ckpt.string(), "--wav", (dir / "src.wav").string(), "--class", "3", "--out", out2})
              .code == kExitOk);
  const AudioClip y = read_wav(out1);
  CHECK(y.samples.size() == c.audio.output_length);
  for (double v : y.samples) CHECK(std::abs(v) <= 1.0);
  CHECK(bytes(out1) == bytes(out2));
  CHECK(run({"synth", "--checkpoint", ckpt.string(), "--out", out1}).code == kExitValidation);

  // Mel-conditioned synthesis from an inspect-mel dump.
  REQUIRE(run({"inspect-mel", "--config", cfg.string(), (dir / "src.wav").string(), "--out-prefix",
               (dir / "src").string()})
              .code == kExitOk);
  CHECK(run({"synth", "--checkpoint", ckpt.string(), "--mel", (dir / "src.mel").string(), "--out", out2}).code ==
        kExitOk);

  const Outcome r = run({"train", "--resume", ckpt.string(), "--steps", "3"});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "run" / "checkpoint_000003.dpng"));
  fs::remove_all(dir);
}

TEST_CASE("training failures leave no checkpoint behind") {
  const fs::path dir = scratch("fault");
  const fs::path cfg = tiny_config(dir);
  const Outcome missing = run({"train", "--config", cfg.string(), "--set", "data.source=" + (dir / "nope").string()});
  CHECK(missing.code == kExitRuntime);
  const Outcome diverge =
      run({"train", "--config", cfg.string(), "--set", "train.lr_generator=1e300", "--set", "train.clip_norm=0"});
  CHECK(diverge.code == kExitRuntime);
  if (fs::exists(dir / "run"))
    for (const auto& e : fs::directory_iterator(dir / "run")) CHECK(e.path().extension() != ".dpng");
  fs::remove_all(dir);
}

TEST_CASE("eval pairs files by name") {
  const fs::path dir = scratch("eval");
  fs::create_directories(dir / "ref");
  fs::create_directories(dir / "deg");
  fs::create_directories(dir / "empty");
  for (int i = 0; i < 2; ++i) {
    const AudioClip c{random_values(16000, i, -0.3, 0.3), 16000};
    write_wav(dir / "ref" / ("c" + std::to_string(i) + ".wav"), c);
    write_wav(dir / "deg" / ("c" + std::to_string(i) + ".wav"), c);
  }
  write_wav(dir / "ref" / "lonely.wav", AudioClip{random_values(16000, 9), 16000});
  const Outcome e = run({"eval", "--reference", (dir / "ref").string(), "--degraded", (dir / "deg").string(), "--out",
                         (dir / "m.csv").string()});
  CHECK(e.code == kExitOk);
  CHECK(e.err.find("lonely.wav") != std::string::npos);
  std::ifstream f(dir / "m.csv");
  std::string line;
  std::getline(f, line);
  std::getline(f, line);
  for (int i = 0; i < 2; ++i) {
    std::getline(f, line);
    CHECK(line == "c" + std::to_string(i) + ".wav,0,0,0,,,,");
  }
  CHECK(run({"eval", "--reference", (dir / "empty").string(), "--degraded", (dir / "empty").string()}).code ==
        kExitValidation);
  fs::remove_all(dir);
}

TEST_CASE("inspect-mel writes a dump and an image of matching size") {
  const fs::path dir = scratch("inspect");
  write_wav(dir / "quiet.wav", AudioClip{std::vector<double>(4096, 0.0), 8000});
  REQUIRE(run({"inspect-mel", "--profile", "toy", (dir / "quiet.wav").string(), "--out-prefix", (dir / "q").string()})
              .code == kExitOk);
  const Config toy = load_profile("toy");
  const MelSpectrogram m = read_mel_dump(dir / "q.mel");
  CHECK(m.n_mels == toy.audio.n_mels);
  CHECK(m.n_frames == stft_frame_count(4096, toy.audio.n_fft, toy.audio.hop));
  std::ifstream pgm(dir / "q.pgm", std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  pgm >> magic >> w >> h >> maxval;
  pgm.get();
  CHECK(magic == "P5");
  CHECK(w == m.n_frames);
  CHECK(h == m.n_mels);
  const std::vector<char> pixels{std::istreambuf_iterator<char>(pgm), {}};
  REQUIRE(pixels.size() == w * h);
  for (char p : pixels) CHECK(p == pixels[0]);
  fs::remove_all(dir);
}
