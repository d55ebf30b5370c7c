#include "dpngan/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "dpngan/error.hpp"

namespace dpngan {
namespace {

std::uint32_t u32(const std::string& d, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(d[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(d[at + 3])) << 24;
}

std::uint16_t u16(const std::string& d, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(d[at]) | static_cast<unsigned char>(d[at + 1]) << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("wav: cannot open " + path.string());
  const std::string d((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (d.size() < 12 || d.compare(0, 4, "RIFF") != 0 || d.compare(8, 4, "WAVE") != 0) {
    throw FormatError("wav: missing RIFF/WAVE header" + where);
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= d.size()) {
    const std::string id = d.substr(pos, 4);
    const std::uint32_t size = u32(d, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > d.size()) throw FormatError("wav: chunk '" + id + "' truncated" + where);
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: fmt chunk too short" + where);
      format = u16(d, body);
      channels = u16(d, body + 2);
      rate = u32(d, body + 4);
      bits = u16(d, body + 14);
      if (format == 0xFFFE && size >= 26) format = u16(d, body + 24);  // extensible: sub-format tag
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk" + where);
      if (format != 1 || bits != 16) {
        throw FormatError("wav: unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                          " bits); only 16-bit PCM is supported" + where);
      }
      if (channels != 1 && channels != 2) throw FormatError("wav: unsupported channel count " + std::to_string(channels) + where);
      if (rate == 0) throw FormatError("wav: zero sample rate" + where);
      const std::size_t frame = 2u * channels;
      if (size % frame != 0) throw FormatError("wav: data size is not a whole number of frames" + where);
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      const std::size_t n = size / frame;
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          acc += static_cast<std::int16_t>(u16(d, body + i * frame + 2 * c)) / 32768.0;
        }
        clip.samples[i] = acc / channels;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError("wav: no data chunk" + where);
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ValueError("wav: sample rate must be positive");
  const auto bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + bytes);
  out += "RIFF";
  put32(out, 36 + bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, bytes);
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw NumericError("wav: non-finite sample");
    const long q = std::clamp(std::lround(std::clamp(s, -1.0, 1.0) * 32768.0), -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("wav: cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("wav: write failed for " + path.string());
}

}  // namespace dpngan
