#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dpngan/tensor.hpp"

namespace dpngan {

// Seeded generator used for every random draw in the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Mixes several integers into one seed (splitmix64 finaliser).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

struct Parameter {
  std::string name;
  Tensor tensor;  // leaf; its gradient buffer is the accumulator
};

// Ordered, uniquely named parameter collection of one model.
class ParameterSet {
 public:
  // Registers a new trainable leaf and returns the shared handle.
  Tensor add(const std::string& name, Shape shape, double fill = 0.0);
  Tensor add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);

  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t element_count() const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Parameter& at(const std::string& name) const;
  std::vector<std::string> names() const;

  void zero_grad();
  // Copies values of every parameter whose name also exists in `other` and
  // whose shapes agree; returns the number of tensors copied.
  std::size_t assign_from(const ParameterSet& other);

 private:
  std::vector<Parameter> items_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace dpngan
