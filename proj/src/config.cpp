#include "dpngan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dpngan/error.hpp"

namespace dpngan {

MelParams AudioConfig::mel_params() const {
  MelParams p;
  p.sample_rate = sample_rate;
  p.n_fft = n_fft;
  p.hop = hop;
  p.n_mels = n_mels;
  p.f_min = f_min;
  p.f_max = f_max;
  return p;
}

std::size_t AudioConfig::frames() const { return stft_frame_count(output_length, n_fft, hop); }

namespace {

static_assert(std::is_same_v<std::uint64_t, unsigned long> && std::is_same_v<std::size_t, unsigned long>,
              "seed fields share the size_t parser");

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "cannot parse '" + v + "' as a number");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  if (v == "pi") return kPi;
  if (v == "pi/2") return kPi / 2.0;
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "cannot parse '" + v + "' as a real");
  }
  if (pos != v.size() || !std::isfinite(out)) throw ConfigError(key, "cannot parse '" + v + "' as a real");
  return out;
}

std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Reads or writes one field given its textual value.
struct FieldAccess {
  const std::string* key = nullptr;
  const std::string* input = nullptr;  // set when parsing
  std::string output;                  // filled when printing
  bool matched = false;

  bool wants(const char* name) const { return input == nullptr || *key == name; }

  void handle(std::size_t& f) {
    if (input) f = parse_number<std::size_t>(*key, *input);
    else output = std::to_string(f);
  }
  void handle(int& f) {
    if (input) f = parse_number<int>(*key, *input);
    else output = std::to_string(f);
  }
  void handle(double& f) {
    if (input) f = parse_real(*key, *input);
    else output = format_real(f);
  }
  void handle(bool& f) {
    if (input) {
      if (*input == "true" || *input == "1" || *input == "yes") f = true;
      else if (*input == "false" || *input == "0" || *input == "no") f = false;
      else throw ConfigError(*key, "expected true or false, got '" + *input + "'");
    } else {
      output = f ? "true" : "false";
    }
  }
  void handle(std::string& f) {
    if (input) f = *input;
    else output = f;
  }
  void handle(ActivationKind& f) {
    if (input) {
      try {
        f = parse_activation(*input);
      } catch (const ValueError& e) {
        throw ConfigError(*key, e.what());
      }
    } else {
      output = to_string(f);
    }
  }
  void handle(std::vector<std::size_t>& f) {
    if (input) {
      f.clear();
      for (const auto& item : split_list(*input)) f.push_back(parse_number<std::size_t>(*key, item));
    } else {
      output.clear();
      for (std::size_t i = 0; i < f.size(); ++i) output += (i ? ", " : "") + std::to_string(f[i]);
    }
  }
  void handle(std::vector<std::string>& f) {
    if (input) {
      f = split_list(*input);
    } else {
      output.clear();
      for (std::size_t i = 0; i < f.size(); ++i) output += (i ? ", " : "") + f[i];
    }
  }
};

// Calls visit(name, field) for every configurable field, in file order.
template <class Visit>
void for_each_field(Config& c, Visit&& visit) {
  auto& a = c.audio;
  visit("audio.sample_rate", a.sample_rate);
  visit("audio.n_fft", a.n_fft);
  visit("audio.hop", a.hop);
  visit("audio.n_mels", a.n_mels);
  visit("audio.f_min", a.f_min);
  visit("audio.f_max", a.f_max);
  visit("audio.output_length", a.output_length);
  auto& g = c.generator;
  visit("generator.init_channels", g.init_channels);
  visit("generator.init_kernel", g.init_kernel);
  visit("generator.meta_width", g.meta_width);
  visit("generator.meta_hidden", g.meta_hidden);
  visit("generator.upscale_kernel", g.upscale_kernel);
  visit("generator.dpn_depth", g.dpn_depth);
  visit("generator.dpn_channels", g.dpn_channels);
  visit("generator.block_kernel", g.block_kernel);
  visit("generator.psroi_bins", g.psroi_bins);
  visit("generator.out_channels", g.out_channels);
  visit("generator.lowpass_cutoff", g.lowpass_cutoff);
  visit("generator.highpass_cutoff", g.highpass_cutoff);
  visit("generator.activation", g.activation);
  visit("generator.use_metadata", g.use_metadata);
  visit("generator.use_dpn", g.use_dpn);
  visit("generator.use_deform", g.use_deform);
  visit("generator.use_psroi", g.use_psroi);
  auto& d = c.discriminator;
  visit("discriminator.periods", d.periods);
  visit("discriminator.kernels", d.kernels);
  visit("discriminator.depth", d.depth);
  visit("discriminator.msd_channels", d.msd_channels);
  visit("discriminator.mcd_channels", d.mcd_channels);
  visit("discriminator.pool_kernel", d.pool_kernel);
  visit("discriminator.pool_stride", d.pool_stride);
  visit("discriminator.final_stride", d.final_stride);
  visit("discriminator.msd_psroi_bins", d.msd_psroi_bins);
  visit("discriminator.mcd_psroi_bins", d.mcd_psroi_bins);
  visit("discriminator.hidden", d.hidden);
  visit("discriminator.activation", d.activation);
  visit("discriminator.use_msd", d.use_msd);
  visit("discriminator.use_mcd", d.use_mcd);
  visit("discriminator.use_deform_in_mcd", d.use_deform_in_mcd);
  visit("discriminator.use_deform_in_msd", d.use_deform_in_msd);
  visit("discriminator.use_psroi", d.use_psroi);
  visit("discriminator.split_heads", d.split_heads);
  auto& s = c.data;
  visit("data.source", s.source);
  visit("data.sidecar", s.sidecar);
  visit("data.n_items", s.n_items);
  visit("data.train_fraction", s.train_fraction);
  visit("data.validation_fraction", s.validation_fraction);
  visit("data.test_fraction", s.test_fraction);
  visit("data.noise_scale", s.noise_scale);
  auto& t = c.train;
  visit("train.lr_generator", t.lr_generator);
  visit("train.lr_discriminator", t.lr_discriminator);
  visit("train.beta1", t.beta1);
  visit("train.beta2", t.beta2);
  visit("train.adam_epsilon", t.adam_epsilon);
  visit("train.batch_size", t.batch_size);
  visit("train.max_steps", t.max_steps);
  visit("train.max_epochs", t.max_epochs);
  visit("train.d_steps_per_g", t.d_steps_per_g);
  visit("train.checkpoint_interval", t.checkpoint_interval);
  visit("train.clip_norm", t.clip_norm);
  visit("train.fake_replay", t.fake_replay);
  visit("train.lambda_fm", t.lambda_fm);
  visit("train.lambda_mel", t.lambda_mel);
  visit("train.seed", t.seed);
  visit("train.out_dir", t.out_dir);
  visit("ablations", c.ablations);
}

}  // namespace

void set_field(Config& config, const std::string& key, const std::string& value) {
  if (key == "profile") {
    config.profile = value;
    return;
  }
  FieldAccess access;
  access.key = &key;
  access.input = &value;
  for_each_field(config, [&](const char* name, auto& field) {
    if (key == name) {
      access.handle(field);
      access.matched = true;
    }
  });
  if (!access.matched) throw ConfigError(key, "unknown configuration field");
  if (key == "ablations") {
    const auto names = config.ablations;
    for (const auto& n : names) {
      try {
        apply_ablation(config, n);
      } catch (const ValueError& e) {
        throw ConfigError(key, e.what());
      }
    }
  }
}

std::vector<std::string> field_names() {
  Config c;
  std::vector<std::string> names{"profile"};
  for_each_field(c, [&](const char* name, auto&) { names.emplace_back(name); });
  return names;
}

Config parse_config(const std::string& text, Config base, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no), "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no), "expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    set_field(base, key, value);
  }
  return base;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path.string(), "cannot open configuration file");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base), path.string());
}

std::filesystem::path profile_directory() {
  if (const char* env = std::getenv("DPNGAN_PROFILE_DIR"); env != nullptr && *env != '\0') return env;
  return DPNGAN_PROFILE_DIR;
}

Config load_profile(const std::string& name) {
  const auto known = {"small", "large", "toy"};
  if (std::find(known.begin(), known.end(), name) == known.end()) {
    throw ConfigError("profile", "unknown profile '" + name + "' (expected small, large or toy)");
  }
  Config base;
  base.profile = name;
  return load_config(profile_directory() / (name + ".profile"), base);
}

std::string to_text(const Config& config) {
  Config copy = config;
  std::ostringstream os;
  os << "profile = " << copy.profile << '\n';
  std::ostringstream sections;
  std::string section;
  for_each_field(copy, [&](const char* name, auto& field) {
    FieldAccess access;
    const std::string key = name;
    access.key = &key;
    access.handle(field);
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec.empty()) {
      os << key << " = " << access.output << '\n';
      return;
    }
    if (sec != section) sections << "\n[" << sec << "]\n";
    section = sec;
    sections << key.substr(dot + 1) << " = " << access.output << '\n';
  });
  os << sections.str();
  return os.str();
}

void validate(const Config& c) {
  auto positive = [](const char* key, auto v) {
    if (!(v > 0)) throw ConfigError(key, "must be positive");
  };
  positive("audio.sample_rate", c.audio.sample_rate);
  positive("audio.hop", c.audio.hop);
  positive("audio.n_mels", c.audio.n_mels);
  positive("audio.output_length", c.audio.output_length);
  if (c.audio.n_fft < 2) throw ConfigError("audio.n_fft", "must be at least 2");
  if (c.audio.output_length < c.audio.n_fft) throw ConfigError("audio.output_length", "shorter than audio.n_fft");
  try {
    c.audio.mel_params().validate();
  } catch (const ValueError& e) {
    throw ConfigError("audio.f_max", e.what());
  }
  if (c.audio.frames() < 2) throw ConfigError("audio.output_length", "yields fewer than two mel frames");
  if (c.audio.n_mels % 2 != 0) throw ConfigError("audio.n_mels", "must be even (2x2 max pooling)");

  const auto& g = c.generator;
  positive("generator.init_channels", g.init_channels);
  positive("generator.init_kernel", g.init_kernel);
  if (g.init_kernel % 2 == 0) throw ConfigError("generator.init_kernel", "must be odd");
  positive("generator.meta_width", g.meta_width);
  positive("generator.meta_hidden", g.meta_hidden);
  if (g.upscale_kernel < 2) throw ConfigError("generator.upscale_kernel", "must be at least the stride (2)");
  positive("generator.dpn_depth", g.dpn_depth);
  positive("generator.dpn_channels", g.dpn_channels);
  positive("generator.block_kernel", g.block_kernel);
  if (g.block_kernel % 2 == 0) throw ConfigError("generator.block_kernel", "must be odd");
  positive("generator.psroi_bins", g.psroi_bins);
  if (g.out_channels < 2) throw ConfigError("generator.out_channels", "must be at least 2 (channel normalisation)");
  for (auto [key, v] : {std::pair{"generator.lowpass_cutoff", g.lowpass_cutoff}, {"generator.highpass_cutoff", g.highpass_cutoff}}) {
    if (!(v > 0.0) || v > kPi + 1e-12) throw ConfigError(key, "must lie in (0, pi]");
  }
  if (g.use_psroi && c.audio.frames() / 2 < g.psroi_bins) {
    throw ConfigError("generator.psroi_bins", "exceeds the decimated sequence length");
  }

  const auto& d = c.discriminator;
  if (!d.use_msd && !d.use_mcd) throw ConfigError("discriminator.use_msd", "at least one branch must be enabled");
  if (d.periods.empty() && d.use_mcd) throw ConfigError("discriminator.periods", "must not be empty");
  for (auto p : d.periods) {
    if (p == 0) throw ConfigError("discriminator.periods", "periods must be positive");
  }
  for (std::size_t i = 0; i < d.periods.size(); ++i) {
    for (std::size_t j = i + 1; j < d.periods.size(); ++j) {
      if (d.periods[i] == d.periods[j]) throw ConfigError("discriminator.periods", "periods must be distinct");
    }
  }
  if (d.kernels.empty()) throw ConfigError("discriminator.kernels", "must not be empty");
  for (auto k : d.kernels) {
    if (k == 0 || k % 2 == 0) throw ConfigError("discriminator.kernels", "kernel sizes must be odd and positive");
  }
  positive("discriminator.depth", d.depth);
  positive("discriminator.msd_channels", d.msd_channels);
  positive("discriminator.mcd_channels", d.mcd_channels);
  positive("discriminator.pool_kernel", d.pool_kernel);
  positive("discriminator.pool_stride", d.pool_stride);
  positive("discriminator.final_stride", d.final_stride);
  positive("discriminator.msd_psroi_bins", d.msd_psroi_bins);
  positive("discriminator.mcd_psroi_bins", d.mcd_psroi_bins);
  positive("discriminator.hidden", d.hidden);
  if (d.use_mcd && d.use_psroi) {
    for (auto p : d.periods) {
      if (p < d.mcd_psroi_bins) throw ConfigError("discriminator.mcd_psroi_bins", "exceeds period " + std::to_string(p));
    }
  }

  const auto& s = c.data;
  if (s.source.empty()) throw ConfigError("data.source", "must be 'synthetic' or a corpus directory");
  positive("data.n_items", s.n_items);
  for (auto [key, v] : {std::pair{"data.train_fraction", s.train_fraction}, {"data.validation_fraction", s.validation_fraction},
                        {"data.test_fraction", s.test_fraction}}) {
    if (!(v >= 0.0) || v > 1.0) throw ConfigError(key, "must lie in [0, 1]");
  }
  if (s.train_fraction + s.validation_fraction + s.test_fraction > 1.0 + 1e-9) {
    throw ConfigError("data.train_fraction", "split fractions sum above 1");
  }
  if (!(s.train_fraction > 0.0)) throw ConfigError("data.train_fraction", "training split must not be empty");
  if (!(s.noise_scale >= 0.0)) throw ConfigError("data.noise_scale", "must be non-negative");

  const auto& t = c.train;
  positive("train.lr_generator", t.lr_generator);
  positive("train.lr_discriminator", t.lr_discriminator);
  if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  positive("train.adam_epsilon", t.adam_epsilon);
  positive("train.batch_size", t.batch_size);
  positive("train.max_steps", t.max_steps);
  positive("train.d_steps_per_g", t.d_steps_per_g);
  positive("train.checkpoint_interval", t.checkpoint_interval);
  if (!(t.clip_norm >= 0.0)) throw ConfigError("train.clip_norm", "must be non-negative");
  if (!(t.lambda_fm >= 0.0)) throw ConfigError("train.lambda_fm", "must be non-negative");
  if (!(t.lambda_mel >= 0.0)) throw ConfigError("train.lambda_mel", "must be non-negative");
  if (t.out_dir.empty()) throw ConfigError("train.out_dir", "must not be empty");
}

std::vector<std::string> ablation_names() {
  return {"use_metadata", "use_dpn",  "use_prak", "use_deform", "use_psroi",
          "use_msd",      "use_mcd",  "use_deform_in_mcd", "fm_loss", "mel_loss"};
}

void apply_ablation(Config& c, const std::string& name) {
  if (name == "use_metadata") c.generator.use_metadata = false;
  else if (name == "use_dpn") c.generator.use_dpn = false;
  else if (name == "use_prak") {
    c.generator.activation = ActivationKind::relu;
    c.discriminator.activation = ActivationKind::relu;
  } else if (name == "use_deform") c.generator.use_deform = false;
  else if (name == "use_psroi") {
    c.generator.use_psroi = false;
    c.discriminator.use_psroi = false;
  } else if (name == "use_msd") c.discriminator.use_msd = false;
  else if (name == "use_mcd") c.discriminator.use_mcd = false;
  else if (name == "use_deform_in_mcd") c.discriminator.use_deform_in_mcd = false;
  else if (name == "fm_loss") c.train.lambda_fm = 0.0;
  else if (name == "mel_loss") c.train.lambda_mel = 0.0;
  else throw ValueError("unknown ablation switch '" + name + "'");
  if (std::find(c.ablations.begin(), c.ablations.end(), name) == c.ablations.end()) c.ablations.push_back(name);
}

}  // namespace dpngan
