#pragma once

// Thin wrapper over FFTW3 with a per-length plan cache. Transforms are
// unnormalised, matching FFTW conventions.

#include <complex>
#include <span>

namespace dpngan::fft {

using cplx = std::complex<double>;

// x (n reals) -> X (n/2+1 bins), X_k = sum_t x_t e^{-2 pi i k t / n}.
void forward_real(std::span<const double> x, std::span<cplx> out);

// Hermitian half spectrum (n/2+1 bins) -> n reals, y_t = sum_k X_k e^{+2 pi i k t / n}
// over the full Hermitian extension. The imaginary parts of the DC and (even n)
// Nyquist bins are ignored.
void inverse_real(std::span<const cplx> spectrum, std::span<double> out);

// Full complex transform of length n; sign -1 forward, +1 inverse.
void complex_transform(std::span<const cplx> in, std::span<cplx> out, int sign);

}  // namespace dpngan::fft
