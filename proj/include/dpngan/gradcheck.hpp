#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dpngan/tensor.hpp"

namespace dpngan {

struct GradCheckOptions {
  double step = 1e-4;        // scaled by max(1, |x_i|); fourth-order stencil
  double tolerance = 1e-4;   // on |a-b| / max(|a|, |b|, floor)
  // floor = max(absolute_floor, scale_floor * largest |analytic| of the same
  // input, global_floor * largest |analytic| over all inputs)
  double absolute_floor = 1e-8;
  double scale_floor = 1e-3;
  double global_floor = 1e-6;
  // An element that still fails is re-checked at points moved by this
  // relative amount (tape gradient recomputed there); success counts it as a
  // kink of the original point.
  double relocation = 1e-3;
  std::size_t relocation_attempts = 3;
  std::uint64_t seed = 0;    // projection of non-scalar outputs
  std::size_t max_elements_per_input = 0;  // 0 checks every element
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool passed = true;
  std::size_t checked = 0;
  // Elements where one-sided differences disagree (non-differentiable point);
  // reported but not counted as failures.
  std::size_t kinks = 0;
  std::string worst;
};

using MultiTensorFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Compares tape gradients of f with central finite differences for every
// input. Non-scalar outputs are reduced with a fixed random projection.
GradCheckReport gradient_check(const MultiTensorFn& f, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& options = {});

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               const GradCheckOptions& options = {});

// Checks gradients with respect to existing leaves (e.g. model parameters),
// perturbing them in place; `f` must read them through its own handles.
GradCheckReport check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             const GradCheckOptions& options = {});

}  // namespace dpngan
