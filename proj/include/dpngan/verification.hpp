#pragma once

// Finite-difference verification of every differentiable operation and of
// miniature end-to-end models, shared by the CLI and the test suites.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpngan/config.hpp"
#include "dpngan/gradcheck.hpp"

namespace dpngan {

struct SuiteCase {
  std::string name;
  GradCheckReport report;
  double seconds = 0.0;
};

struct SuiteResult {
  std::vector<SuiteCase> cases;
  double seconds = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
  // One line per case: name, checked elements, kinks, max relative error, status.
  std::string table() const;
};

// Shrinks a configuration to a miniature model (generator output of 64
// samples, discriminator input of 256) that keeps every architectural switch.
Config miniature_config(const Config& base);

// Runs the operation checks, then the miniature generator and discriminator
// built from `base` with gradients taken with respect to all parameters.
SuiteResult run_gradient_suite(const Config& base, std::uint64_t seed = 0,
                               const std::function<void(const SuiteCase&)>& progress = {});

// Only the miniature generator and discriminator checks.
SuiteResult run_model_checks(const Config& base, std::uint64_t seed = 0,
                             const std::function<void(const SuiteCase&)>& progress = {});

}  // namespace dpngan
