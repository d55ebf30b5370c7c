#include "dpngan/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

// Turns off gradient recording for a parameter set for the guard's lifetime.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParameterSet& params) : params_(params) {
    for (const auto& p : params_.items()) Tensor(p.tensor).set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (const auto& p : params_.items()) Tensor(p.tensor).set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParameterSet& params_;
};

Tensor mean_of(const std::vector<Tensor>& terms) {
  return scale(terms.size() == 1 ? terms.front() : add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

void require_finite(const char* what, double loss, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("train: non-finite ") + what + " loss at step " + std::to_string(step + 1));
  }
}

}  // namespace

Adam::Adam(double rate, double beta1, double beta2, double epsilon)
    : rate_(rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(rate > 0.0)) throw ValueError("adam: learning rate must be positive");
}

void Adam::step(ParameterSet& params) {
  const auto& items = params.items();
  if (m_.empty()) {
    for (const auto& p : items) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (m_.size() != items.size()) throw ValueError("adam: parameter set changed between steps");
  for (const auto& p : items) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in parameter " + p.name);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor t = items[i].tensor;
    auto g = t.grad();
    if (g.empty()) continue;
    auto w = t.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= rate_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + epsilon_);
    }
  }
}

void Adam::save(std::vector<NamedArray>& out, const std::string& prefix, const ParameterSet& params) const {
  out.push_back({prefix + ".t", Shape{1}, {static_cast<double>(t_)}});
  if (m_.empty()) return;
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back({prefix + ".m/" + items[i].name, items[i].tensor.shape(), m_[i]});
    out.push_back({prefix + ".v/" + items[i].name, items[i].tensor.shape(), v_[i]});
  }
}

void Adam::load(const std::vector<NamedArray>& in, const std::string& prefix, const ParameterSet& params) {
  const NamedArray* t = find_entry(in, prefix + ".t");
  if (t == nullptr || t->values.size() != 1) throw FormatError("checkpoint: missing optimizer state " + prefix);
  t_ = static_cast<std::size_t>(t->values[0]);
  m_.clear();
  v_.clear();
  if (t_ == 0) return;
  for (const auto& p : params.items()) {
    const NamedArray* m = find_entry(in, prefix + ".m/" + p.name);
    const NamedArray* v = find_entry(in, prefix + ".v/" + p.name);
    if (m == nullptr || v == nullptr || m->values.size() != p.tensor.numel() || v->values.size() != p.tensor.numel()) {
      throw FormatError("checkpoint: optimizer moments for " + p.name + " missing or mis-shaped");
    }
    m_.push_back(m->values);
    v_.push_back(v->values);
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.items()) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& p : params.items()) {
      Tensor t = p.tensor;
      for (auto& g : t.mutable_grad()) g *= f;
    }
  }
  return norm;
}

std::string csv_header() { return "step,adv_g,adv_d,fm,mel,total"; }

std::string to_csv(const LossRecord& r) {
  std::ostringstream os;
  os << std::setprecision(17) << r.step << ',' << r.adv_g << ',' << r.adv_d << ',' << r.fm << ',' << r.mel << ',' << r.total;
  return os.str();
}

void perturb_corpus(Corpus& corpus, double noise_scale, std::uint64_t seed) {
  if (noise_scale == 0.0) return;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    corpus.items[i].clip = add_noise(corpus.items[i].clip, noise_scale, mix_seed(seed, i, 0x707274ULL));
  }
}

Corpus load_training_corpus(const Config& config) {
  const auto& d = config.data;
  if (config.generator.meta_width < meta_layout::kUsed) {
    throw ConfigError("generator.meta_width", "must be at least " + std::to_string(meta_layout::kUsed) +
                                                  " to hold the corpus metadata layout");
  }
  if (d.source == "synthetic") {
    return synth_dataset(d.n_items, config.audio.output_length, config.audio.sample_rate, config.train.seed,
                         config.generator.meta_width);
  }
  const std::filesystem::path root = d.source;
  const std::filesystem::path sidecar = d.sidecar.empty() ? root / "metadata.tsv" : std::filesystem::path(d.sidecar);
  return load_corpus(root, sidecar, config.audio.sample_rate, config.generator.meta_width);
}

Trainer::Trainer(Config config, Corpus corpus)
    : config_(std::move(config)),
      corpus_(std::move(corpus)),
      adam_g_(config_.train.lr_generator, config_.train.beta1, config_.train.beta2, config_.train.adam_epsilon),
      adam_d_(config_.train.lr_discriminator, config_.train.beta1, config_.train.beta2, config_.train.adam_epsilon) {
  validate(config_);
  if (corpus_.items.empty()) throw ValueError("trainer: empty corpus");
  if (corpus_.items.front().metadata.size() != config_.generator.meta_width) {
    throw ConfigError("generator.meta_width", "corpus metadata has width " +
                                                  std::to_string(corpus_.items.front().metadata.size()));
  }
  if (corpus_.sample_rate != config_.audio.sample_rate) {
    throw ConfigError("audio.sample_rate", "corpus is sampled at " + std::to_string(corpus_.sample_rate) + " Hz");
  }
  perturb_corpus(corpus_, config_.data.noise_scale, config_.train.seed);
  const auto& t = config_.train;
  try {
    split_ = make_split(corpus_.items.size(),
                        {config_.data.train_fraction, config_.data.validation_fraction, config_.data.test_fraction}, t.seed);
  } catch (const ValueError& e) {
    throw ConfigError("data.n_items", e.what());
  }
  generator_ = std::make_unique<Generator>(config_.generator, config_.audio, t.seed);
  discriminator_ = std::make_unique<Discriminator>(config_.discriminator, config_.audio.output_length, t.seed);
  batches_ = std::make_unique<BatchIterator>(corpus_, split_.train, t.batch_size, t.seed, config_.audio.output_length,
                                             config_.audio.mel_params());
}

std::vector<Tensor> Trainer::draw_replay(std::size_t count, Rng& rng) const {
  std::vector<Tensor> out;
  if (replay_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
  for (std::size_t b = 0; b < count; ++b) {
    out.emplace_back(Shape{config_.audio.output_length}, replay_[pick(rng.engine())]);
  }
  return out;
}

// Reservoir sampling keeps a uniform sample over every fake seen so far.
void Trainer::store_replay(const std::vector<Tensor>& fakes, Rng& rng) {
  const std::size_t capacity = config_.train.fake_replay;
  if (capacity == 0) return;
  for (const Tensor& f : fakes) {
    ++replay_seen_;
    std::vector<double> v(f.values().begin(), f.values().end());
    if (replay_.size() < capacity) {
      replay_.push_back(std::move(v));
    } else if (const std::size_t j = std::uniform_int_distribution<std::size_t>(0, replay_seen_ - 1)(rng.engine());
               j < capacity) {
      replay_[j] = std::move(v);
    }
  }
}

std::size_t Trainer::total_steps() const {
  std::size_t n = config_.train.max_steps;
  if (config_.train.max_epochs > 0) n = std::min(n, config_.train.max_epochs * batches_->batches_per_epoch());
  return n;
}

LossRecord Trainer::train_step() {
  const Batch batch = batches_->at_step(step_);
  const std::size_t n = batch.size();
  const MelParams mel_params = config_.audio.mel_params();
  ParameterSet& gp = generator_->parameters();
  ParameterSet& dp = discriminator_->parameters();
  LossRecord rec;

  std::vector<Tensor> fakes(n);
  {
    NoGradGuard no_grad;
    for (std::size_t b = 0; b < n; ++b) fakes[b] = generator_->forward(batch.mel_at(b), batch.metadata_at(b));
  }
  Rng replay_rng(mix_seed(config_.train.seed, 0x72706cULL, step_));
  const std::vector<Tensor> replayed = draw_replay(n, replay_rng);
  for (std::size_t k = 0; k < config_.train.d_steps_per_g; ++k) {
    dp.zero_grad();
    std::vector<Tensor> real_scores, fake_scores;
    for (std::size_t b = 0; b < n; ++b) {
      real_scores.push_back(discriminator_->forward(batch.waveform_at(b)).score);
      fake_scores.push_back(discriminator_->forward(fakes[b]).score);
    }
    Tensor loss_d = adv_loss_discriminator(real_scores, fake_scores);
    if (!replayed.empty()) {
      std::vector<Tensor> replay_scores;
      for (const Tensor& old : replayed) replay_scores.push_back(discriminator_->forward(old).score);
      loss_d = scale(add(loss_d, adv_loss_discriminator(real_scores, replay_scores)), 0.5);
    }
    require_finite("discriminator", loss_d.item(), step_);
    backward(loss_d);
    if (config_.train.clip_norm > 0.0) clip_grad_norm(dp, config_.train.clip_norm);
    adam_d_.step(dp);
    rec.adv_d = loss_d.item();
  }
  store_replay(fakes, replay_rng);

  gp.zero_grad();
  {
    FreezeGuard freeze(dp);
    std::vector<Tensor> fake_scores, mels;
    std::vector<std::vector<Tensor>> real_taps, fake_taps;
    for (std::size_t b = 0; b < n; ++b) {
      const Tensor fake = generator_->forward(batch.mel_at(b), batch.metadata_at(b));
      DiscriminatorOutput real;
      {
        NoGradGuard no_grad;
        real = discriminator_->forward(batch.waveform_at(b));
      }
      DiscriminatorOutput out = discriminator_->forward(fake);
      fake_scores.push_back(out.score);
      real_taps.push_back(std::move(real.taps));
      fake_taps.push_back(std::move(out.taps));
      mels.push_back(mel_loss_to_target(batch.mel_at(b), fake, mel_params));
    }
    const Tensor adv = adv_loss_generator(fake_scores);
    const Tensor fm = feature_matching_loss(real_taps, fake_taps);
    const Tensor mel = mean_of(mels);
    const Tensor total = generator_total(adv, fm, mel, {config_.train.lambda_fm, config_.train.lambda_mel});
    require_finite("generator", total.item(), step_);
    backward(total);
    rec.adv_g = adv.item();
    rec.fm = fm.item();
    rec.mel = mel.item();
    rec.total = total.item();
  }
  if (config_.train.clip_norm > 0.0) clip_grad_norm(gp, config_.train.clip_norm);
  adam_g_.step(gp);
  dp.zero_grad();
  ++step_;
  rec.step = step_;
  return rec;
}

std::vector<LossRecord> Trainer::fit(const Progress& progress) {
  const std::filesystem::path dir = config_.train.out_dir;
  std::filesystem::create_directories(dir);
  const auto log_path = dir / "train_log.csv";
  std::ofstream log(log_path, step_ == 0 ? std::ios::trunc : std::ios::app);
  if (!log) throw FormatError("trainer: cannot open log " + log_path.string());
  if (step_ == 0) log << csv_header() << '\n';
  std::vector<LossRecord> records;
  const std::size_t total = total_steps();
  while (step_ < total) {
    const LossRecord rec = train_step();
    records.push_back(rec);
    log << to_csv(rec) << '\n';
    log.flush();
    if (progress) progress(rec);
    if (step_ % config_.train.checkpoint_interval == 0 || step_ == total) {
      std::ostringstream name;
      name << "checkpoint_" << std::setw(6) << std::setfill('0') << step_ << ".dpng";
      save_checkpoint(dir / name.str());
    }
  }
  return records;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::vector<NamedArray> entries = snapshot(generator_->parameters());
  auto d = snapshot(discriminator_->parameters());
  entries.insert(entries.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  adam_g_.save(entries, "@adam.gen", generator_->parameters());
  adam_d_.save(entries, "@adam.disc", discriminator_->parameters());
  entries.push_back({"@step", Shape{1}, {static_cast<double>(step_)}});
  if (!replay_.empty()) {
    NamedArray pool{"@replay", Shape{replay_.size(), config_.audio.output_length}, {}};
    for (const auto& r : replay_) pool.values.insert(pool.values.end(), r.begin(), r.end());
    entries.push_back(std::move(pool));
    entries.push_back({"@replay.seen", Shape{1}, {static_cast<double>(replay_seen_)}});
  }
  entries.push_back(text_entry("@config", to_text(config_)));
  write_archive(path, entries);
}

namespace {

Config config_from(const std::vector<NamedArray>& entries, const std::filesystem::path& path) {
  const NamedArray* cfg = find_entry(entries, "@config");
  if (cfg == nullptr) throw FormatError("checkpoint: " + path.string() + " has no configuration record");
  return parse_config(entry_text(*cfg), Config{}, path.string() + ":@config");
}

std::size_t step_from(const std::vector<NamedArray>& entries) {
  const NamedArray* s = find_entry(entries, "@step");
  return s == nullptr || s->values.empty() ? 0 : static_cast<std::size_t>(s->values[0]);
}

}  // namespace

std::unique_ptr<Trainer> Trainer::resume(const std::filesystem::path& path, Corpus corpus,
                                         const std::function<void(Config&)>& adjust) {
  const auto entries = read_archive(path);
  Config config = config_from(entries, path);
  if (adjust) adjust(config);
  auto trainer = std::make_unique<Trainer>(std::move(config), std::move(corpus));
  restore(trainer->generator_->parameters(), entries);
  restore(trainer->discriminator_->parameters(), entries);
  trainer->adam_g_.load(entries, "@adam.gen", trainer->generator_->parameters());
  trainer->adam_d_.load(entries, "@adam.disc", trainer->discriminator_->parameters());
  trainer->step_ = step_from(entries);
  if (const NamedArray* pool = find_entry(entries, "@replay"); pool != nullptr && trainer->config_.train.fake_replay > 0) {
    const NamedArray* seen = find_entry(entries, "@replay.seen");
    const std::size_t length = trainer->config_.audio.output_length;
    if (seen == nullptr || pool->shape.size() != 2 || pool->shape[1] != length) {
      throw FormatError("checkpoint: " + path.string() + " has a malformed replay pool");
    }
    for (std::size_t i = 0; i < pool->shape[0]; ++i) {
      trainer->replay_.emplace_back(pool->values.begin() + static_cast<std::ptrdiff_t>(i * length),
                                    pool->values.begin() + static_cast<std::ptrdiff_t>((i + 1) * length));
    }
    trainer->replay_seen_ = static_cast<std::size_t>(seen->values.at(0));
  }
  return trainer;
}

Config read_checkpoint_config(const std::filesystem::path& checkpoint) {
  return config_from(read_archive(checkpoint), checkpoint);
}

LoadedGenerator load_generator(const std::filesystem::path& checkpoint) {
  const auto entries = read_archive(checkpoint);
  LoadedGenerator out;
  out.config = config_from(entries, checkpoint);
  out.generator = std::make_unique<Generator>(out.config.generator, out.config.audio, out.config.train.seed);
  restore(out.generator->parameters(), entries);
  out.step = step_from(entries);
  return out;
}

double discriminator_accuracy(const Discriminator& discriminator, const Generator& generator, const Batch& batch) {
  NoGradGuard no_grad;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (discriminator.forward(batch.waveform_at(b)).score.item() > 0.5) ++correct;
    const Tensor fake = generator.forward(batch.mel_at(b), batch.metadata_at(b));
    if (discriminator.forward(fake).score.item() <= 0.5) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(2 * batch.size());
}

}  // namespace dpngan
