#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "dpngan/error.hpp"

namespace dpngan::fft {
namespace {

enum class Kind { r2c, c2r, c2c_fwd, c2c_inv };

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, int n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(kind, n);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::vector<double> r(static_cast<std::size_t>(n));
    std::vector<fftw_complex> c(static_cast<std::size_t>(n));
    std::vector<fftw_complex> c2(static_cast<std::size_t>(n));
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::r2c: plan = fftw_plan_dft_r2c_1d(n, r.data(), c.data(), flags); break;
      case Kind::c2r: plan = fftw_plan_dft_c2r_1d(n, c.data(), r.data(), flags); break;
      case Kind::c2c_fwd: plan = fftw_plan_dft_1d(n, c.data(), c2.data(), FFTW_FORWARD, flags); break;
      case Kind::c2c_inv: plan = fftw_plan_dft_1d(n, c.data(), c2.data(), FFTW_BACKWARD, flags); break;
    }
    if (plan == nullptr) throw Error("fft: planner failed for length " + std::to_string(n));
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<Kind, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

void forward_real(std::span<const double> x, std::span<cplx> out) {
  const int n = static_cast<int>(x.size());
  if (out.size() != x.size() / 2 + 1) throw ShapeError("fft: output must have n/2+1 bins");
  fftw_plan plan = cache().get(Kind::r2c, n);
  fftw_execute_dft_r2c(plan, const_cast<double*>(x.data()), as_fftw(out.data()));
}

void inverse_real(std::span<const cplx> spectrum, std::span<double> out) {
  const int n = static_cast<int>(out.size());
  if (spectrum.size() != out.size() / 2 + 1) throw ShapeError("fft: spectrum must have n/2+1 bins");
  std::vector<cplx> scratch(spectrum.begin(), spectrum.end());  // c2r destroys its input
  fftw_plan plan = cache().get(Kind::c2r, n);
  fftw_execute_dft_c2r(plan, as_fftw(scratch.data()), out.data());
}

void complex_transform(std::span<const cplx> in, std::span<cplx> out, int sign) {
  const int n = static_cast<int>(in.size());
  if (out.size() != in.size()) throw ShapeError("fft: complex transform size mismatch");
  fftw_plan plan = cache().get(sign < 0 ? Kind::c2c_fwd : Kind::c2c_inv, n);
  fftw_execute_dft(plan, as_fftw(const_cast<cplx*>(in.data())), as_fftw(out.data()));
}

}  // namespace dpngan::fft
