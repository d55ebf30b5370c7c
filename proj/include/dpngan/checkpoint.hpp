#pragma once

// Binary tensor archive ("DPNG" format, version 1):
//
//   magic "DPNG" | version u32 | count u32 |
//   count x { name_len u16 | name bytes | rank u8 | rank x extent u32 |
//             numel x f64 }
//
// All integers and reals little-endian. Writes go to a temporary sibling file
// that is renamed over the target, so a failed write never leaves a partial
// archive behind.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpngan/parameter.hpp"

namespace dpngan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_archive(const std::filesystem::path& path, const std::vector<NamedArray>& entries);
std::vector<NamedArray> read_archive(const std::filesystem::path& path);

std::vector<NamedArray> snapshot(const ParameterSet& params, const std::string& prefix = "");
// Loads values into matching parameters; every parameter must be present
// with an identical shape.
void restore(ParameterSet& params, const std::vector<NamedArray>& entries, const std::string& prefix = "");

// Text payloads (configs) stored as byte-valued rank-1 arrays.
NamedArray text_entry(const std::string& name, const std::string& text);
std::string entry_text(const NamedArray& entry);
const NamedArray* find_entry(const std::vector<NamedArray>& entries, const std::string& name);

}  // namespace dpngan
