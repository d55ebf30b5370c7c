#include "dpngan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

constexpr char kMagic[4] = {'D', 'P', 'N', 'G'};

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw FormatError("checkpoint: truncated file");
  }
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_archive(const std::filesystem::path& path, const std::vector<NamedArray>& entries) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("checkpoint: name too long: " + e.name);
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("checkpoint: rank too large: " + e.name);
    if (shape_numel(e.shape) != e.values.size()) throw ShapeError("checkpoint: entry " + e.name + " has inconsistent shape");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out += e.name;
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.shape.size()));
    for (auto ext : e.shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ext));
    for (double v : e.values) put_f64(out, v);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("checkpoint: cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedArray> read_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));
  if (r.get_bytes(4) != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic in " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedArray> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray e;
    e.name = r.get_bytes(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint8_t>();
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.get<std::uint32_t>());
    const std::size_t n = shape_numel(e.shape);
    e.values.resize(n);
    for (auto& v : e.values) v = r.get_f64();
    entries.push_back(std::move(e));
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes in " + path.string());
  return entries;
}

std::vector<NamedArray> snapshot(const ParameterSet& params, const std::string& prefix) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& p : params.items()) {
    auto v = p.tensor.values();
    out.push_back({prefix + p.name, p.tensor.shape(), std::vector<double>(v.begin(), v.end())});
  }
  return out;
}

void restore(ParameterSet& params, const std::vector<NamedArray>& entries, const std::string& prefix) {
  for (const auto& p : params.items()) {
    const NamedArray* e = find_entry(entries, prefix + p.name);
    if (e == nullptr) throw FormatError("checkpoint: missing parameter " + prefix + p.name);
    if (e->shape != p.tensor.shape()) {
      throw ShapeError("checkpoint: parameter " + p.name + " has shape " + shape_str(e->shape) + ", model expects " +
                       shape_str(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    std::copy(e->values.begin(), e->values.end(), t.mutable_values().begin());
  }
}

NamedArray text_entry(const std::string& name, const std::string& text) {
  NamedArray e{name, Shape{std::max<std::size_t>(text.size(), 1)}, {}};
  for (unsigned char c : text) e.values.push_back(static_cast<double>(c));
  if (text.empty()) e.values.push_back(0.0);
  return e;
}

std::string entry_text(const NamedArray& entry) {
  std::string s;
  for (double v : entry.values) {
    if (v != 0.0) s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return s;
}

const NamedArray* find_entry(const std::vector<NamedArray>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace dpngan
