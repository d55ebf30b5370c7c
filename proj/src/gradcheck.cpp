#include "dpngan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dpngan/parameter.hpp"

namespace dpngan {
namespace {

// Elements far below the largest gradient of their tensor are compared against
// a floor tied to that scale, where finite differences are dominated by
// round-off.
double relative_error(double a, double b, double floor) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace

GradCheckReport check_leaves(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                             const GradCheckOptions& options) {
  for (auto& leaf : leaves) leaf.zero_grad();
  Tensor projection;
  auto reduce = [&](const Tensor& y) {
    if (y.numel() == 1) return y;
    if (!projection.defined()) {
      Rng rng(mix_seed(options.seed, 0x5eed));
      std::vector<double> r(y.numel());
      for (auto& v : r) v = rng.uniform(-1.0, 1.0);
      projection = Tensor(y.shape(), std::move(r));
    }
    return dot(y, projection);
  };

  auto tape_gradients = [&] {
    for (auto& leaf : leaves) leaf.zero_grad();
    backward(reduce(f()));
    std::vector<std::vector<double>> out;
    for (const auto& leaf : leaves) {
      out.emplace_back(leaf.grad().begin(), leaf.grad().end());
      if (out.back().empty()) out.back().assign(leaf.numel(), 0.0);
    }
    return out;
  };
  const auto gradients = tape_gradients();

  auto eval = [&]() {
    NoGradGuard guard;
    return reduce(f()).item();
  };
  const double f0 = eval();

  double global_scale = 0.0;
  for (const auto& g : gradients) {
    for (double v : g) global_scale = std::max(global_scale, std::fabs(v));
  }

  GradCheckReport report;
  Rng pick(mix_seed(options.seed, 0xc4ec));
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor& leaf = leaves[k];
    auto values = leaf.mutable_values();
    const std::vector<double>& analytic = gradients[k];
    double scale = 0.0;
    for (double g : analytic) scale = std::max(scale, std::fabs(g));
    const double floor =
        std::max({options.absolute_floor, options.scale_floor * scale, options.global_floor * global_scale});

    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_elements_per_input != 0 && idx.size() > options.max_elements_per_input) {
      std::shuffle(idx.begin(), idx.end(), pick.engine());
      idx.resize(options.max_elements_per_input);
      std::sort(idx.begin(), idx.end());
    }

    for (std::size_t i : idx) {
      const double x0 = values[i];
      const double h = options.step * std::max(1.0, std::fabs(x0));
      // Fourth-order central difference around x0 + centre.
      auto difference = [&](double centre, double step) {
        auto at = [&](double dx) {
          values[i] = x0 + centre + dx;
          const double v = eval();
          values[i] = x0;
          return v;
        };
        return (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
      };
      // A kink inside the stencil spoils the estimate; shrinking the step
      // moves the stencil off it when the kink is not at the centre itself.
      auto best_error = [&](double centre, double expected, double& numeric) {
        numeric = difference(centre, h);
        double err = relative_error(expected, numeric, floor);
        for (double shrink = 8.0; err > options.tolerance && shrink <= 64.0; shrink *= 8.0) {
          const double refined = difference(centre, h / shrink);
          const double refined_err = relative_error(expected, refined, floor);
          if (refined_err < err) {
            err = refined_err;
            numeric = refined;
          }
        }
        return err;
      };
      double numeric = 0.0;
      const double err = best_error(0.0, analytic[i], numeric);
      ++report.checked;
      if (err <= options.tolerance) {
        if (err > report.max_relative_error) report.max_relative_error = err;
        continue;
      }
      // Breakpoints too close to x0 for any step: compare tape and finite
      // differences at nearby points instead.
      bool relocated = false;
      for (std::size_t attempt = 0; attempt < options.relocation_attempts && !relocated; ++attempt) {
        const double shift = options.relocation * std::max(1.0, std::fabs(x0)) * pick.uniform(0.5, 1.5) *
                             (attempt % 2 == 0 ? 1.0 : -1.0);
        values[i] = x0 + shift;
        const double moved = tape_gradients()[k][i];
        values[i] = x0;
        double moved_numeric = 0.0;
        relocated = best_error(shift, moved, moved_numeric) <= options.tolerance;
      }
      if (relocated) {
        ++report.kinks;
        continue;
      }
      // Failure candidate: a kink shows one-sided slopes that disagree at
      // any step size, while smooth curvature shrinks with the step.
      auto asymmetry = [&](double step) {
        values[i] = x0 + step;
        const double up = eval();
        values[i] = x0 - step;
        const double dn = eval();
        values[i] = x0;
        const double fwd = (up - f0) / step, bwd = (f0 - dn) / step;
        return std::fabs(fwd - bwd) / std::max({1.0, std::fabs(fwd), std::fabs(bwd)});
      };
      const double a1 = asymmetry(h);
      const double a2 = asymmetry(h * 0.1);
      if (a1 > 1e-3 && a2 > 0.5 * a1) {
        ++report.kinks;
        continue;
      }
      if (err > report.max_relative_error || report.passed) {
        std::ostringstream os;
        os << "input " << k << " element " << i << ": analytic " << analytic[i] << " numeric " << numeric;
        report.worst = os.str();
      }
      report.max_relative_error = std::max(report.max_relative_error, err);
      report.passed = false;
    }
  }
  return report;
}

GradCheckReport gradient_check(const MultiTensorFn& f, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& options) {
  std::vector<Tensor> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) {
    Tensor leaf = in.detach();
    leaf.set_requires_grad(true);
    leaves.push_back(leaf);
  }
  return check_leaves([&] { return f(leaves); }, leaves, options);
}

GradCheckReport gradient_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                               const GradCheckOptions& options) {
  return gradient_check([&f](const std::vector<Tensor>& in) { return f(in[0]); }, std::vector<Tensor>{x},
                        options);
}

}  // namespace dpngan
