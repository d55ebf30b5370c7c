#pragma once

// Model, data and training configuration, with a plain-text profile format:
//
//   # comment
//   [generator]
//   dpn_depth = 4
//   discriminator.periods = 2, 3, 5
//
// Keys are `section.field`; a `[section]` line prefixes subsequent bare keys.
// Unknown keys and malformed values raise ConfigError naming the key.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpngan/activations.hpp"
#include "dpngan/dsp.hpp"

namespace dpngan {

struct AudioConfig {
  int sample_rate = 16000;
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 0.0;
  std::size_t output_length = 47749;

  MelParams mel_params() const;
  // Mel frames of one output-length clip.
  std::size_t frames() const;
};

struct GeneratorConfig {
  std::size_t init_channels = 32;
  std::size_t init_kernel = 3;
  std::size_t meta_width = 152;
  std::size_t meta_hidden = 64;
  std::size_t upscale_kernel = 4;
  std::size_t dpn_depth = 4;
  std::size_t dpn_channels = 64;
  std::size_t block_kernel = 3;
  std::size_t psroi_bins = 4;
  std::size_t out_channels = 2;
  double lowpass_cutoff = kPi / 2.0;
  double highpass_cutoff = kPi / 2.0;
  ActivationKind activation = ActivationKind::prak;
  bool use_metadata = true;
  bool use_dpn = true;
  bool use_deform = true;
  bool use_psroi = true;
};

struct DiscriminatorConfig {
  std::vector<std::size_t> periods{2, 3, 5, 7, 11};
  std::vector<std::size_t> kernels{3, 5, 7, 11};
  std::size_t depth = 3;
  std::size_t msd_channels = 16;  // per kernel branch
  std::size_t mcd_channels = 8;   // per kernel branch
  std::size_t pool_kernel = 11;
  std::size_t pool_stride = 4;
  std::size_t final_stride = 4;
  std::size_t msd_psroi_bins = 4;
  std::size_t mcd_psroi_bins = 2;  // per axis
  std::size_t hidden = 512;
  ActivationKind activation = ActivationKind::prak;
  bool use_msd = true;
  bool use_mcd = true;
  bool use_deform_in_mcd = true;
  bool use_deform_in_msd = true;
  bool use_psroi = true;
  bool split_heads = false;
};

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or a corpus root directory
  std::string sidecar;               // defaults to <root>/metadata.tsv
  std::size_t n_items = 200;
  double train_fraction = 0.9;
  double validation_fraction = 0.01;
  double test_fraction = 0.09;
  double noise_scale = 0.0;
};

struct TrainConfig {
  double lr_generator = 1e-5;
  double lr_discriminator = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_steps = 1000;
  std::size_t max_epochs = 0;  // 0: no epoch limit
  std::size_t d_steps_per_g = 1;
  std::size_t checkpoint_interval = 100;
  double clip_norm = 10.0;  // 0 disables global-norm clipping
  // Reservoir of past generator outputs replayed to the discriminator next to
  // the current fakes; 0 disables replay.
  std::size_t fake_replay = 0;
  double lambda_fm = 2.0;
  double lambda_mel = 45.0;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
};

struct Config {
  std::string profile = "small";
  AudioConfig audio;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  DataConfig data;
  TrainConfig train;
  std::vector<std::string> ablations;  // switch names applied on top of the profile
};

// Parses `text` on top of `base`; `origin` names the source in errors.
Config parse_config(const std::string& text, Config base = {}, const std::string& origin = "<config>");
Config load_config(const std::filesystem::path& path, Config base = {});
// Shipped profiles: small, large, toy.
Config load_profile(const std::string& name);
std::filesystem::path profile_directory();

// Serialises every field; parse_config(to_text(c)) == c.
std::string to_text(const Config& config);

void set_field(Config& config, const std::string& key, const std::string& value);
std::vector<std::string> field_names();

// Throws ConfigError on the first invalid field.
void validate(const Config& config);

// Ablation switches: use_metadata, use_dpn, use_prak, use_deform, use_psroi,
// use_msd, use_mcd, use_deform_in_mcd, fm_loss, mel_loss.
std::vector<std::string> ablation_names();
void apply_ablation(Config& config, const std::string& name);

}  // namespace dpngan
