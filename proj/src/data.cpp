#include "dpngan/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpngan/error.hpp"
#include "dpngan/parameter.hpp"

namespace dpngan {

std::vector<double> encode_metadata(const ClipAttributes& a, std::size_t width) {
  using namespace meta_layout;
  if (width < kUsed) throw ValueError("metadata: width " + std::to_string(width) + " is below the layout size " + std::to_string(kUsed));
  if (a.scalars.size() > kScalars) throw ValueError("metadata: at most " + std::to_string(kScalars) + " scalar attributes");
  std::vector<double> v(width, 0.0);
  const bool known_class = a.class_id >= 0 && a.class_id < static_cast<int>(kClasses);
  v[kClassOffset + (known_class ? static_cast<std::size_t>(a.class_id) : kClasses)] = 1.0;
  const bool known_speaker = a.speaker_id >= 0 && a.speaker_id < static_cast<int>(kSpeakers);
  v[kSpeakerOffset + (known_speaker ? static_cast<std::size_t>(a.speaker_id) : kSpeakers)] = 1.0;
  for (std::size_t i = 0; i < a.scalars.size(); ++i) {
    if (!std::isfinite(a.scalars[i])) throw ValueError("metadata: non-finite scalar attribute");
    v[kScalarOffset + i] = a.scalars[i];
  }
  return v;
}

double synthetic_fundamental(int class_id) { return 110.0 * std::pow(2.0, class_id / 10.0); }

Corpus synth_dataset(std::size_t n_items, std::size_t length, int sample_rate, std::uint64_t seed, std::size_t meta_width) {
  if (sample_rate <= 0) throw ValueError("synth_dataset: sample rate must be positive");
  Corpus corpus;
  corpus.sample_rate = sample_rate;
  corpus.items.reserve(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    Rng rng(mix_seed(seed, i, 0x73796eULL));
    const int cls = static_cast<int>(i % meta_layout::kClasses);
    const double f0 = synthetic_fundamental(cls);
    const int harmonics = 1 + static_cast<int>(rng.next_u64() % 3);
    std::vector<double> amp(harmonics), phase(harmonics);
    for (int h = 0; h < harmonics; ++h) {
      amp[h] = rng.uniform(0.7, 1.0) / (h + 1);
      phase[h] = rng.uniform(0.0, 2.0 * kPi);
    }
    const double attack = rng.uniform(0.005, 0.05);
    const double decay = rng.uniform(0.2, 0.8);
    const double peak = rng.uniform(0.5, 0.9);
    std::vector<double> x(length);
    double max_abs = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      const double sec = static_cast<double>(t) / sample_rate;
      const double env = std::min(1.0, sec / attack) * std::exp(-sec / decay);
      double s = 0.0;
      for (int h = 0; h < harmonics; ++h) s += amp[h] * std::sin(2.0 * kPi * f0 * (h + 1) * sec + phase[h]);
      x[t] = env * s;
      max_abs = std::max(max_abs, std::abs(x[t]));
    }
    if (max_abs > 0.0) {
      for (auto& v : x) v *= peak / max_abs;
    }
    CorpusItem item;
    item.name = "synth_" + std::to_string(i);
    item.clip = {std::move(x), sample_rate};
    item.attributes.class_id = cls;
    item.attributes.scalars = {f0 / 1000.0};
    item.metadata = encode_metadata(item.attributes, meta_width);
    corpus.items.push_back(std::move(item));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& root, const std::filesystem::path& sidecar, int sample_rate,
                   std::size_t meta_width) {
  if (!std::filesystem::is_directory(root)) throw FormatError("corpus: root " + root.string() + " is not a directory");
  std::ifstream f(sidecar);
  if (!f) throw FormatError("corpus: cannot open sidecar " + sidecar.string());
  Corpus corpus;
  corpus.sample_rate = sample_rate;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("#dpn-meta", 0) == 0 && line != "#dpn-meta v1") {
        throw FormatError("corpus: unsupported sidecar version '" + line + "'");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const std::string where = sidecar.string() + ":" + std::to_string(line_no);
    if (fields.size() < 3) throw FormatError("corpus: " + where + " needs path, class and speaker columns");
    CorpusItem item;
    item.name = fields[0];
    try {
      item.attributes.class_id = fields[1].empty() ? -1 : std::stoi(fields[1]);
      item.attributes.speaker_id = fields[2].empty() ? -1 : std::stoi(fields[2]);
      for (std::size_t i = 3; i < fields.size(); ++i) item.attributes.scalars.push_back(std::stod(fields[i]));
    } catch (const std::exception&) {
      throw FormatError("corpus: " + where + " has a malformed attribute column");
    }
    try {
      item.metadata = encode_metadata(item.attributes, meta_width);
    } catch (const ValueError& e) {
      throw FormatError("corpus: " + where + ": " + e.what());
    }
    AudioClip clip = read_wav(root / fields[0]);
    if (clip.sample_rate != sample_rate) {
      clip.samples = resample(clip.samples, clip.sample_rate, sample_rate);
      clip.sample_rate = sample_rate;
    }
    item.clip = std::move(clip);
    corpus.items.push_back(std::move(item));
  }
  if (corpus.items.empty()) throw FormatError("corpus: sidecar " + sidecar.string() + " lists no clips");
  return corpus;
}

void write_sidecar(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("corpus: cannot write sidecar " + path.string());
  f << "#dpn-meta v1\n";
  f.precision(17);
  for (const auto& item : corpus.items) {
    f << item.name << '\t' << item.attributes.class_id << '\t' << item.attributes.speaker_id;
    for (double s : item.attributes.scalars) f << '\t' << s;
    f << '\n';
  }
}

AudioClip add_noise(const AudioClip& clip, double scale, std::uint64_t seed) {
  if (!(scale >= 0.0)) throw ValueError("add_noise: scale must be non-negative");
  AudioClip out = clip;
  if (scale == 0.0) return out;
  Rng rng(mix_seed(seed, 0x6e6f69ULL));
  for (auto& s : out.samples) s = std::clamp(s + scale * rng.normal(), -1.0, 1.0);
  return out;
}

DatasetSplit make_split(std::size_t n_items, const SplitFractions& fr, std::uint64_t seed) {
  for (double v : {fr.train, fr.validation, fr.test}) {
    if (!(v >= 0.0) || v > 1.0) throw ValueError("make_split: fractions must lie in [0, 1]");
  }
  const double total = fr.train + fr.validation + fr.test;
  if (total > 1.0 + 1e-9) throw ValueError("make_split: fractions sum above 1");
  const auto count = [n_items](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n_items))); };
  const std::size_t n_train = count(fr.train), n_val = count(fr.validation);
  if (n_train + n_val > n_items) throw ValueError("make_split: rounded split sizes exceed the corpus");
  const std::size_t n_test = std::abs(total - 1.0) < 1e-9 ? n_items - n_train - n_val : std::min(count(fr.test), n_items - n_train - n_val);
  auto require = [](double f, std::size_t n, const char* what) {
    if (f > 0.0 && n == 0) throw ValueError(std::string("make_split: requested ") + what + " split is empty");
  };
  require(fr.train, n_train, "train");
  require(fr.validation, n_val, "validation");
  require(fr.test, n_test, "test");
  if (n_train == 0) throw ValueError("make_split: training split is empty");

  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x73706cULL));
  std::shuffle(order.begin(), order.end(), rng.engine());
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  split.validation.assign(order.begin() + static_cast<long>(n_train), order.begin() + static_cast<long>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<long>(n_train + n_val), order.begin() + static_cast<long>(n_train + n_val + n_test));
  return split;
}

Tensor Batch::mel_at(std::size_t b) const {
  return Tensor(Shape{mel.extent(1), mel.extent(2)},
                std::vector<double>(mel.values().begin() + static_cast<long>(b * mel.extent(1) * mel.extent(2)),
                                    mel.values().begin() + static_cast<long>((b + 1) * mel.extent(1) * mel.extent(2))));
}

Tensor Batch::metadata_at(std::size_t b) const {
  const std::size_t w = metadata.extent(1);
  return Tensor(Shape{w}, std::vector<double>(metadata.values().begin() + static_cast<long>(b * w),
                                              metadata.values().begin() + static_cast<long>((b + 1) * w)));
}

Tensor Batch::waveform_at(std::size_t b) const {
  const std::size_t l = waveform.extent(1);
  return Tensor(Shape{l}, std::vector<double>(waveform.values().begin() + static_cast<long>(b * l),
                                              waveform.values().begin() + static_cast<long>((b + 1) * l)));
}

BatchIterator::BatchIterator(const Corpus& corpus, std::vector<std::size_t> indices, std::size_t batch_size,
                             std::uint64_t seed, std::size_t clip_length, const MelParams& mel)
    : corpus_(&corpus), indices_(std::move(indices)), batch_size_(batch_size), seed_(seed), clip_length_(clip_length), mel_(mel) {
  if (batch_size_ == 0) throw ValueError("batch_iter: batch size must be positive");
  if (indices_.empty()) throw ValueError("batch_iter: no items to iterate");
  for (auto i : indices_) {
    if (i >= corpus.items.size()) throw ValueError("batch_iter: index out of range");
  }
  mel_.validate();
  stft_frame_count(clip_length_, mel_.n_fft, mel_.hop);
}

std::size_t BatchIterator::batches_per_epoch() const { return (indices_.size() + batch_size_ - 1) / batch_size_; }

std::vector<std::size_t> BatchIterator::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order = indices_;
  Rng rng(mix_seed(seed_, epoch, 0x657063ULL));
  std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

Batch BatchIterator::batch(std::size_t epoch, std::size_t index_in_epoch) const {
  if (index_in_epoch >= batches_per_epoch()) throw ValueError("batch_iter: batch index past the end of the epoch");
  const auto order = epoch_order(epoch);
  const std::size_t begin = index_in_epoch * batch_size_;
  const std::size_t end = std::min(order.size(), begin + batch_size_);
  Batch b;
  b.indices.assign(order.begin() + static_cast<long>(begin), order.begin() + static_cast<long>(end));
  const std::size_t n = b.indices.size();
  const std::size_t frames = stft_frame_count(clip_length_, mel_.n_fft, mel_.hop);
  const std::size_t width = corpus_->items[b.indices.front()].metadata.size();
  std::vector<double> mels, meta, waves;
  mels.reserve(n * mel_.n_mels * frames);
  meta.reserve(n * width);
  waves.reserve(n * clip_length_);
  for (std::size_t idx : b.indices) {
    const auto& item = corpus_->items[idx];
    const auto& src = item.clip.samples;
    std::vector<double> crop(clip_length_, 0.0);
    if (src.size() > clip_length_) {
      Rng rng(mix_seed(seed_, epoch, 0x63726fULL ^ (idx << 20)));
      const std::size_t start = static_cast<std::size_t>(rng.next_u64() % (src.size() - clip_length_ + 1));
      std::copy_n(src.begin() + static_cast<long>(start), clip_length_, crop.begin());
    } else {
      std::copy(src.begin(), src.end(), crop.begin());
    }
    const MelSpectrogram m = mel_spectrogram(crop, mel_);
    mels.insert(mels.end(), m.values.begin(), m.values.end());
    if (item.metadata.size() != width) throw ShapeError("batch_iter: metadata widths differ across items");
    meta.insert(meta.end(), item.metadata.begin(), item.metadata.end());
    waves.insert(waves.end(), crop.begin(), crop.end());
  }
  b.mel = Tensor(Shape{n, mel_.n_mels, frames}, std::move(mels));
  b.metadata = Tensor(Shape{n, width}, std::move(meta));
  b.waveform = Tensor(Shape{n, clip_length_}, std::move(waves));
  return b;
}

Batch BatchIterator::at_step(std::size_t step) const {
  const std::size_t per_epoch = batches_per_epoch();
  return batch(step / per_epoch, step % per_epoch);
}

}  // namespace dpngan
