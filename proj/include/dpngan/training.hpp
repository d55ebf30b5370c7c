#pragma once

// Alternating least-squares GAN optimisation with Adam, CSV loss logging and
// resumable checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpngan/checkpoint.hpp"
#include "dpngan/config.hpp"
#include "dpngan/data.hpp"
#include "dpngan/discriminator.hpp"
#include "dpngan/generator.hpp"
#include "dpngan/losses.hpp"

namespace dpngan {

class Adam {
 public:
  Adam(double rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  // Applies one bias-corrected update from the accumulated gradients. A
  // non-finite gradient aborts before any parameter changes, naming it.
  void step(ParameterSet& params);

  std::size_t steps() const { return t_; }
  void save(std::vector<NamedArray>& out, const std::string& prefix, const ParameterSet& params) const;
  void load(const std::vector<NamedArray>& in, const std::string& prefix, const ParameterSet& params);

 private:
  double rate_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Rescales all gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

struct LossRecord {
  std::size_t step = 0;
  double adv_g = 0.0, adv_d = 0.0, fm = 0.0, mel = 0.0, total = 0.0;
};

std::string csv_header();
std::string to_csv(const LossRecord& record);

// Applies the configured noise scale to every clip (seeded per item).
void perturb_corpus(Corpus& corpus, double noise_scale, std::uint64_t seed);

// Builds the training corpus named by the configuration: the synthetic set or
// a directory with a sidecar file.
Corpus load_training_corpus(const Config& config);

class Trainer {
 public:
  Trainer(Config config, Corpus corpus);

  const Config& config() const { return config_; }
  Generator& generator() { return *generator_; }
  Discriminator& discriminator() { return *discriminator_; }
  const DatasetSplit& split() const { return split_; }
  const Corpus& corpus() const { return corpus_; }
  std::size_t step() const { return step_; }
  std::size_t total_steps() const;

  // One discriminator update (generated batch detached) followed by one
  // generator update with a fresh discriminator pass.
  LossRecord train_step();

  using Progress = std::function<void(const LossRecord&)>;
  // Runs until total_steps(), appending to <out_dir>/train_log.csv and writing
  // <out_dir>/checkpoint_<step>.dpng every checkpoint_interval steps and at
  // the end. Returns the records of this call.
  std::vector<LossRecord> fit(const Progress& progress = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  // Restores a trainer from a checkpoint written by save_checkpoint; the
  // corpus must be the one it was trained on. `adjust` may change fields that
  // do not affect the model (step budget, output directory).
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& path, Corpus corpus,
                                         const std::function<void(Config&)>& adjust = {});

 private:
  Config config_;
  Corpus corpus_;
  DatasetSplit split_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<Discriminator> discriminator_;
  std::unique_ptr<BatchIterator> batches_;
  Adam adam_g_, adam_d_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> replay_;
  std::size_t replay_seen_ = 0;

  std::vector<Tensor> draw_replay(std::size_t count, Rng& rng) const;
  void store_replay(const std::vector<Tensor>& fakes, Rng& rng);
};

// Configuration stored in a checkpoint.
Config read_checkpoint_config(const std::filesystem::path& checkpoint);

// Loads only the generator and configuration from a checkpoint.
struct LoadedGenerator {
  Config config;
  std::unique_ptr<Generator> generator;
  std::size_t step = 0;
};
LoadedGenerator load_generator(const std::filesystem::path& checkpoint);

// Share of items classified correctly by the real score (> 0.5 real,
// otherwise generated) over real clips and `generator` outputs for the same
// conditioning.
double discriminator_accuracy(const Discriminator& discriminator, const Generator& generator, const Batch& batch);

}  // namespace dpngan
