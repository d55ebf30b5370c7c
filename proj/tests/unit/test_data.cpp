#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "dpngan/data.hpp"
#include "dpngan/error.hpp"
#include "dpngan/wav.hpp"
#include "test_support.hpp"

using namespace dpngan;
using namespace dpngan::testing;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dpngan_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("wav round trip within one quantisation step") {
  const fs::path dir = scratch("wav");
  AudioClip clip{random_values(1000, 3, -1, 1), 22050};
  write_wav(dir / "a.wav", clip);
  const AudioClip back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 22050);
  REQUIRE(back.samples.size() == clip.samples.size());
  CHECK(max_abs_diff(back.samples, clip.samples) <= 1.0 / 32768.0);
  write_wav(dir / "b.wav", AudioClip{{32767.0 / 32768.0}, 8000});
  CHECK(read_wav(dir / "b.wav").samples[0] == 32767.0 / 32768.0);
  fs::remove_all(dir);
}

TEST_CASE("wav reader rejects truncated and non-PCM files and averages stereo") {
  const fs::path dir = scratch("wavbad");
  write_wav(dir / "a.wav", AudioClip{random_values(100, 1), 8000});
  fs::resize_file(dir / "a.wav", 60);
  CHECK_THROWS_AS(read_wav(dir / "a.wav"), FormatError);
  {
    std::ofstream f(dir / "junk.wav", std::ios::binary);
    f << "RIFF\x10\0\0\0WAVEjunk";
  }
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), FormatError);
  // Hand-written stereo PCM16 file with frames (1000, 3000) and (-2000, 0).
  {
    std::ofstream f(dir / "st.wav", std::ios::binary);
    auto u32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { f.write(reinterpret_cast<const char*>(&v), 2); };
    f << "RIFF";
    u32(36 + 8);
    f << "WAVEfmt ";
    u32(16);
    u16(1);
    u16(2);
    u32(8000);
    u32(8000 * 4);
    u16(4);
    u16(16);
    f << "data";
    u32(8);
    for (std::int16_t s : {std::int16_t(1000), std::int16_t(3000), std::int16_t(-2000), std::int16_t(0)})
      f.write(reinterpret_cast<const char*>(&s), 2);
  }
  const AudioClip st = read_wav(dir / "st.wav");
  REQUIRE(st.samples.size() == 2);
  CHECK(st.samples[0] == 2000.0 / 32768.0);
  CHECK(st.samples[1] == -1000.0 / 32768.0);
  fs::remove_all(dir);
}

TEST_CASE("synthetic corpus: determinism, metadata, class fundamental") {
  const Corpus a = synth_dataset(12, 16000, 16000, 7);
  const Corpus b = synth_dataset(12, 16000, 16000, 7);
  REQUIRE(a.items.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.items[i].clip.samples == b.items[i].clip.samples);
    CHECK(a.items[i].metadata == b.items[i].metadata);
    const auto& m = a.items[i].metadata;
    CHECK(m.size() == meta_layout::kWidth);
    const double cls = std::accumulate(m.begin(), m.begin() + meta_layout::kClasses + 1, 0.0);
    CHECK(cls == 1.0);
    for (std::size_t j = meta_layout::kUsed; j < m.size(); ++j) CHECK(m[j] == 0.0);
    for (double s : a.items[i].clip.samples) CHECK(std::abs(s) <= 1.0);
  }
  CHECK(synthetic_fundamental(0) == 110.0);
  CHECK(std::abs(synthetic_fundamental(5) - 110.0 * std::pow(2.0, 0.5)) < 1e-12);
  // Naive Hann-windowed DFT of a central frame: the strongest bin in the
  // fundamental's neighbourhood sits within one bin of it.
  const std::size_t n = 1024;
  for (const auto& item : a.items) {
    const auto& x = item.clip.samples;
    const std::size_t start = x.size() / 2 - n / 2;
    const double f0 = synthetic_fundamental(item.attributes.class_id);
    double best = -1.0;
    std::size_t best_bin = 0;
    for (std::size_t k = 1; k < 40; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double w = 0.5 - 0.5 * std::cos(2 * kPi * t / n);
        re += w * x[start + t] * std::cos(2 * kPi * k * t / n);
        im -= w * x[start + t] * std::sin(2 * kPi * k * t / n);
      }
      if (re * re + im * im > best) {
        best = re * re + im * im;
        best_bin = k;
      }
    }
    CHECK(std::abs(static_cast<double>(best_bin) - f0 * n / 16000.0) <= 1.0);
  }
}

TEST_CASE("noise perturbation") {
  const AudioClip c{random_values(20000, 1, -0.3, 0.3), 16000};
  CHECK(add_noise(c, 0.0, 3).samples == c.samples);
  const AudioClip n = add_noise(c, 0.05, 3);
  double acc = 0.0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) acc += std::pow(n.samples[i] - c.samples[i], 2);
  CHECK(std::abs(std::sqrt(acc / c.samples.size()) - 0.05) < 0.005);
  for (double v : add_noise(c, 0.9, 4).samples) CHECK(std::abs(v) <= 1.0);
  CHECK(add_noise(c, 0.05, 3).samples == n.samples);
}

TEST_CASE("splits") {
  const DatasetSplit s = make_split(1000, {0.9, 0.01, 0.09}, 5);
  CHECK(s.train.size() == 900);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 90);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1000);
  CHECK(make_split(1000, {0.9, 0.01, 0.09}, 5).train == s.train);
  CHECK(make_split(1000, {0.9, 0.01, 0.09}, 6).train != s.train);
  CHECK_THROWS(make_split(10, {0.9, 0.2, 0.0}, 1));
  CHECK_THROWS(make_split(10, {0.0, 0.5, 0.5}, 1));
}

TEST_CASE("batching") {
  const Corpus c = synth_dataset(10, 600, 8000, 2);
  MelParams p;
  p.sample_rate = 8000;
  p.n_fft = 128;
  p.hop = 32;
  p.n_mels = 8;
  std::vector<std::size_t> idx(10);
  std::iota(idx.begin(), idx.end(), 0);
  const BatchIterator it(c, idx, 4, 9, 512, p);
  CHECK(it.batches_per_epoch() == 3);
  CHECK(it.batch(0, 0).size() == 4);
  CHECK(it.batch(0, 1).size() == 4);
  CHECK(it.batch(0, 2).size() == 2);
  const auto e0 = it.epoch_order(0), e1 = it.epoch_order(1);
  CHECK(e0 != e1);
  CHECK(std::multiset<std::size_t>(e0.begin(), e0.end()) == std::multiset<std::size_t>(e1.begin(), e1.end()));
  const Batch b = it.batch(0, 0);
  CHECK(b.mel.shape() == Shape{4, 8, stft_frame_count(512, 128, 32)});
  CHECK(b.metadata.shape() == Shape{4, meta_layout::kWidth});
  CHECK(b.waveform.shape() == Shape{4, 512});
  const Batch again = it.at_step(0);
  CHECK(again.indices == b.indices);
  CHECK(max_abs_diff(again.waveform.values(), b.waveform.values()) == 0.0);
  // Mel rows are computed from the cropped waveform.
  const MelSpectrogram m = mel_spectrogram(b.waveform_at(1).values(), p);
  CHECK(max_abs_diff(b.mel_at(1).values(), m.values) < 1e-12);
}

TEST_CASE("corpus directory with sidecar") {
  const fs::path dir = scratch("corpus");
  fs::create_directories(dir / "01");
  write_wav(dir / "01" / "0_01_0.wav", AudioClip{random_values(800, 1, -0.5, 0.5), 16000});
  write_wav(dir / "01" / "7_01_1.wav", AudioClip{random_values(1600, 2, -0.5, 0.5), 32000});
  {
    std::ofstream f(dir / "metadata.tsv");
    f << "#dpn-meta v1\n# comment\n01/0_01_0.wav\t0\t1\t0.5\t0.25\n01/7_01_1.wav\t42\t-1\n";
  }
  const Corpus c = load_corpus(dir, dir / "metadata.tsv", 16000);
  REQUIRE(c.items.size() == 2);
  CHECK(c.items[1].clip.samples.size() == 800);
  const auto& m0 = c.items[0].metadata;
  CHECK(m0[meta_layout::kClassOffset + 0] == 1.0);
  CHECK(m0[meta_layout::kSpeakerOffset + 1] == 1.0);
  CHECK(m0[meta_layout::kScalarOffset] == 0.5);
  CHECK(m0[meta_layout::kScalarOffset + 1] == 0.25);
  const auto& m1 = c.items[1].metadata;
  CHECK(m1[meta_layout::kClassOffset + meta_layout::kClasses] == 1.0);
  CHECK(m1[meta_layout::kSpeakerOffset + meta_layout::kSpeakers] == 1.0);
  {
    std::ofstream f(dir / "bad.tsv");
    f << "missing.wav\t0\t1\n";
  }
  CHECK_THROWS(load_corpus(dir, dir / "bad.tsv", 16000));
  write_sidecar(dir / "copy.tsv", c);
  const Corpus again = load_corpus(dir, dir / "copy.tsv", 16000);
  CHECK(again.items[0].metadata == m0);
  fs::remove_all(dir);
}
