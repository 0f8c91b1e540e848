#pragma once

// Thin RAII-free wrapper over FFTW real transforms. Plans are created once per
// size behind a mutex (FFTW planning is not thread safe) and then executed with
// the new-array interface, which is.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace epsflow::fft {

using Complex = std::complex<double>;

namespace detail {

struct RealPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

inline const RealPlans& plans_for(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, RealPlans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    std::vector<double> real(n);
    std::vector<Complex> spectrum(n / 2 + 1);
    auto* spec = reinterpret_cast<fftw_complex*>(spectrum.data());
    // FFTW_ESTIMATE keeps planning deterministic; FFTW_UNALIGNED lets us
    // execute on arbitrary std::vector storage.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    RealPlans p;
    p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), spec, flags);
    p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, real.data(),
                                     flags | FFTW_DESTROY_INPUT);
    it = cache.emplace(n, p).first;
  }
  return it->second;
}

}  // namespace detail

/// Unnormalized forward transform: returns the n/2+1 nonnegative-frequency
/// coefficients sum_j f_j exp(-2 pi i k j / n).
inline std::vector<Complex> forward(std::span<const double> values) {
  const std::size_t n = values.size();
  const auto& p = detail::plans_for(n);
  std::vector<double> in(values.begin(), values.end());
  std::vector<Complex> out(n / 2 + 1);
  fftw_execute_dft_r2c(p.forward, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

/// Inverse of forward(), including the 1/n normalization.
inline std::vector<double> inverse(std::span<const Complex> coeffs, std::size_t n) {
  const auto& p = detail::plans_for(n);
  std::vector<Complex> in(coeffs.begin(), coeffs.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace epsflow::fft
