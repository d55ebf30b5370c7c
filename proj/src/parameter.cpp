#include "dpngan/parameter.hpp"

#include <algorithm>

#include "dpngan/error.hpp"

namespace dpngan {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

Tensor ParameterSet::add(const std::string& name, Shape shape, double fill) {
  if (index_.count(name) != 0) throw ValueError("duplicate parameter name '" + name + "'");
  Tensor t(std::move(shape), fill);
  t.set_requires_grad(true);
  index_[name] = items_.size();
  items_.push_back({name, t});
  return t;
}

Tensor ParameterSet::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  Tensor t = add(name, std::move(shape));
  for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  return t;
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return items_[it->second];
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.name);
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

std::size_t ParameterSet::assign_from(const ParameterSet& other) {
  std::size_t copied = 0;
  for (auto& p : items_) {
    if (!other.contains(p.name)) continue;
    const Tensor& src = other.at(p.name).tensor;
    if (src.shape() != p.tensor.shape()) continue;
    Tensor dst = p.tensor;
    std::ranges::copy(src.values(), dst.mutable_values().begin());
    ++copied;
  }
  return copied;
}

}  // namespace dpngan
