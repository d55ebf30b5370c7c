#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dpngan/error.hpp"
#include "dpngan/training.hpp"
#include "dpngan/verification.hpp"
#include "test_support.hpp"

using namespace dpngan;
using namespace dpngan::testing;
namespace fs = std::filesystem;

namespace {
Config tiny(const fs::path& out) {
  Config c = miniature_config(load_profile("toy"));
  c.generator.meta_width = meta_layout::kWidth;
  c.data.n_items = 10;
  c.data.train_fraction = 0.6;
  c.data.validation_fraction = 0.2;
  c.data.test_fraction = 0.2;
  c.train.batch_size = 2;
  c.train.max_steps = 4;
  c.train.checkpoint_interval = 2;
  c.train.out_dir = out.string();
  return c;
}
}  // namespace

TEST_CASE("adam matches the bias-corrected update rule") {
  ParameterSet p;
  Tensor w = p.add("w", Shape{2}, 0.0);
  w.mutable_values()[0] = 1.0;
  w.mutable_values()[1] = -2.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Adam adam(lr, b1, b2, eps);
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
  for (int t = 1; t <= 3; ++t) {
    p.zero_grad();
    const double g[2] = {0.5 * t, -1.5 + t};
    w.mutable_grad()[0] = g[0];
    w.mutable_grad()[1] = g[1];
    adam.step(p);
    for (int i = 0; i < 2; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
      CHECK(std::abs(w[i] - x[i]) < 1e-14);
    }
  }
  CHECK(adam.steps() == 3);
  p.zero_grad();
  w.mutable_grad()[1] = NAN;
  const double before = w[0];
  CHECK_THROWS_AS(adam.step(p), NumericError);
  CHECK(w[0] == before);
}

TEST_CASE("global norm clipping") {
  ParameterSet p;
  Tensor a = p.add("a", Shape{1}), b = p.add("b", Shape{1});
  a.mutable_grad()[0] = 3.0;
  b.mutable_grad()[0] = 4.0;
  CHECK(clip_grad_norm(p, 10.0) == 5.0);
  CHECK(a.grad()[0] == 3.0);
  CHECK(clip_grad_norm(p, 1.0) == 5.0);
  CHECK(std::abs(a.grad()[0] - 0.6) < 1e-15);
  CHECK(std::abs(b.grad()[0] - 0.8) < 1e-15);
}

TEST_CASE("csv log format") {
  CHECK(csv_header() == "step,adv_g,adv_d,fm,mel,total");
  const LossRecord r{7, 0.25, 0.5, 1.0, 2.0, 3.5};
  std::istringstream in(to_csv(r));
  std::string field;
  std::vector<std::string> fields;
  while (std::getline(in, field, ',')) fields.push_back(field);
  REQUIRE(fields.size() == 6);
  CHECK(fields[0] == "7");
  CHECK(std::stod(fields[5]) == 3.5);
}

TEST_CASE("training steps produce finite losses, logs and checkpoints") {
  const fs::path out = fs::temp_directory_path() / "dpngan_unit_train";
  fs::remove_all(out);
  const Config c = tiny(out);
  Trainer t(c, load_training_corpus(c));
  CHECK(t.split().train.size() == 6);
  const auto records = t.fit();
  REQUIRE(records.size() == 4);
  for (const auto& r : records) {
    for (double v : {r.adv_g, r.adv_d, r.fm, r.mel, r.total}) CHECK(std::isfinite(v));
    CHECK(std::abs(r.total - (r.adv_g + c.train.lambda_fm * r.fm + c.train.lambda_mel * r.mel)) < 1e-9);
  }
  CHECK(fs::exists(out / "checkpoint_000002.dpng"));
  CHECK(fs::exists(out / "checkpoint_000004.dpng"));
  std::ifstream log(out / "train_log.csv");
  std::string line;
  std::getline(log, line);
  CHECK(line == csv_header());
  std::size_t rows = 0;
  while (std::getline(log, line)) ++rows;
  CHECK(rows == 4);
  const Config stored = read_checkpoint_config(out / "checkpoint_000004.dpng");
  CHECK(to_text(stored) == to_text(c));
  const LoadedGenerator g = load_generator(out / "checkpoint_000004.dpng");
  CHECK(g.step == 4);
  fs::remove_all(out);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run bitwise") {
  const fs::path out = fs::temp_directory_path() / "dpngan_unit_resume";
  fs::remove_all(out);
  const Config c = tiny(out);
  Trainer full(c, load_training_corpus(c));
  std::vector<LossRecord> straight;
  for (int i = 0; i < 4; ++i) straight.push_back(full.train_step());

  Trainer first(c, load_training_corpus(c));
  first.train_step();
  first.train_step();
  fs::create_directories(out);
  first.save_checkpoint(out / "mid.dpng");
  auto resumed = Trainer::resume(out / "mid.dpng", load_training_corpus(c));
  CHECK(resumed->step() == 2);
  for (int i = 2; i < 4; ++i) {
    const LossRecord r = resumed->train_step();
    CHECK(r.total == straight[i].total);
    CHECK(r.mel == straight[i].mel);
  }
  for (auto [a, b] : {std::pair{&full.generator().parameters(), &resumed->generator().parameters()},
                      {&full.discriminator().parameters(), &resumed->discriminator().parameters()}}) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      CHECK(max_abs_diff(a->items()[i].tensor.values(), b->items()[i].tensor.values()) == 0.0);
    }
  }
  fs::remove_all(out);
}

TEST_CASE("the fake replay reservoir is bounded, checkpointed and resumes bitwise") {
  const fs::path out = fs::temp_directory_path() / "dpngan_unit_replay";
  fs::remove_all(out);
  fs::create_directories(out);
  Config c = tiny(out);
  c.train.fake_replay = 3;
  Trainer full(c, load_training_corpus(c));
  std::vector<LossRecord> straight;
  for (int i = 0; i < 5; ++i) straight.push_back(full.train_step());

  Trainer first(c, load_training_corpus(c));
  first.train_step();
  first.train_step();
  first.save_checkpoint(out / "mid.dpng");
  const auto entries = read_archive(out / "mid.dpng");
  const NamedArray* pool = find_entry(entries, "@replay");
  REQUIRE(pool != nullptr);
  CHECK(pool->shape == Shape{3, c.audio.output_length});
  const NamedArray* seen = find_entry(entries, "@replay.seen");
  REQUIRE(seen != nullptr);
  CHECK(seen->values.at(0) == 4.0);

  auto resumed = Trainer::resume(out / "mid.dpng", load_training_corpus(c));
  for (int i = 2; i < 5; ++i) {
    const LossRecord r = resumed->train_step();
    CHECK(r.adv_d == straight[i].adv_d);
    CHECK(r.total == straight[i].total);
  }
  const auto& a = full.discriminator().parameters().items();
  const auto& b = resumed->discriminator().parameters().items();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(max_abs_diff(a[i].tensor.values(), b[i].tensor.values()) == 0.0);

  c.train.fake_replay = 0;
  Trainer plain(c, load_training_corpus(c));
  plain.train_step();
  plain.train_step();
  plain.save_checkpoint(out / "plain.dpng");
  CHECK(find_entry(read_archive(out / "plain.dpng"), "@replay") == nullptr);
  CHECK(plain.train_step().adv_d != straight[2].adv_d);
  fs::remove_all(out);
}

TEST_CASE("discriminator accuracy is a share") {
  const fs::path out = fs::temp_directory_path() / "dpngan_unit_acc";
  const Config c = tiny(out);
  Trainer t(c, load_training_corpus(c));
  const double acc = discriminator_accuracy(t.discriminator(), t.generator(), BatchIterator(t.corpus(), t.split().train, 4, 0, c.audio.output_length, c.audio.mel_params()).batch(0, 0));
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
}

TEST_CASE("trainer rejects invalid configurations") {
  Config c = tiny(fs::temp_directory_path() / "dpngan_unit_bad");
  const Corpus corpus = load_training_corpus(c);
  c.train.batch_size = 0;
  CHECK_THROWS_AS(Trainer(c, corpus), ConfigError);
  c = tiny(fs::temp_directory_path() / "dpngan_unit_bad");
  c.generator.meta_width = 12;
  CHECK_THROWS_AS(load_training_corpus(c), ConfigError);
  CHECK_THROWS_AS(Trainer(c, corpus), ConfigError);
  c = tiny(fs::temp_directory_path() / "dpngan_unit_bad");
  c.audio.sample_rate = 16000;
  CHECK_THROWS_AS(Trainer(c, corpus), ConfigError);
}
