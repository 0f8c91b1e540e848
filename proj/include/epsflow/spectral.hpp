#pragma once

// Fourier machinery on the uniform periodic grid x_i = 2 pi i / N.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "epsflow/fft.hpp"

namespace epsflow::spectral {

using fft::Complex;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Multiplies a half spectrum by (ik)^order. The Nyquist coefficient is
/// dropped for odd orders so the result stays the derivative of a real
/// trigonometric interpolant.
inline void differentiate_spectrum(std::span<Complex> coeffs, std::size_t n, int order) {
  const std::size_t nyquist = n / 2;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (k == nyquist && order % 2 != 0) {
      coeffs[k] = 0.0;
      continue;
    }
    double magnitude = 1.0;
    for (int j = 0; j < order; ++j) magnitude *= static_cast<double>(k);
    // i^order cycles through 1, i, -1, -i.
    const Complex c = coeffs[k] * magnitude;
    switch (order % 4) {
      case 0: coeffs[k] = c; break;
      case 1: coeffs[k] = Complex(-c.imag(), c.real()); break;
      case 2: coeffs[k] = -c; break;
      default: coeffs[k] = Complex(c.imag(), -c.real()); break;
    }
  }
}

/// Exponential low-pass filter exp(-36 (k / (N/2))^36). It leaves the resolved
/// band untouched to roundoff and removes the top modes, where the grid
/// sawtooth of the tangential node distribution would otherwise alias and grow.
inline void exponential_filter(std::span<Complex> coeffs, std::size_t n) {
  thread_local std::map<std::size_t, std::vector<double>> cache;
  auto& factors = cache[n];
  if (factors.empty()) {
    const double half = static_cast<double>(n / 2);
    factors.resize(n / 2 + 1);
    for (std::size_t k = 0; k < factors.size(); ++k) {
      factors[k] = std::exp(-36.0 * std::pow(static_cast<double>(k) / half, 36));
    }
  }
  for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= factors[k];
}

/// Relative level below which Fourier coefficients are treated as roundoff.
inline constexpr double kNoiseFloor = 1e-13;

/// Krasny filter: zeroes every coefficient smaller than kNoiseFloor times the
/// largest one, so repeated differentiation does not amplify roundoff.
inline void noise_filter(std::span<Complex> coeffs) {
  double peak = 0.0;
  for (const auto& c : coeffs) peak = std::max(peak, std::norm(c));
  const double cut = kNoiseFloor * kNoiseFloor * peak;
  for (auto& c : coeffs) {
    if (std::norm(c) < cut) c = 0.0;
  }
}

/// Spectral derivative of order `order` in the grid parameter.
inline std::vector<double> derivative(std::span<const double> values, int order) {
  auto coeffs = fft::forward(values);
  differentiate_spectrum(coeffs, values.size(), order);
  return fft::inverse(coeffs, values.size());
}

/// Fraction of the (non-mean) spectral energy held by the top octave
/// N/4 < k <= N/2, pooled over all supplied components.
inline double top_octave_fraction(std::span<const std::vector<Complex>> spectra, std::size_t n) {
  double total = 0.0;
  double tail = 0.0;
  for (const auto& coeffs : spectra) {
    for (std::size_t k = 1; k < coeffs.size(); ++k) {
      const double e = std::norm(coeffs[k]);
      total += e;
      if (4 * k > n) tail += e;
    }
  }
  if (total == 0.0) return 0.0;
  return tail / total;
}

/// Real trigonometric interpolant of N periodic samples, evaluable anywhere.
class TrigInterpolant {
 public:
  explicit TrigInterpolant(std::span<const double> values)
      : n_(values.size()), coeffs_(fft::forward(values)) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& c : coeffs_) c *= scale;
  }

  std::size_t size() const { return n_; }
  std::span<const Complex> coefficients() const { return coeffs_; }

  double value(double x) const { return evaluate(x, 0); }
  double derivative(double x) const { return evaluate(x, 1); }

  double mean() const { return coeffs_[0].real(); }

 private:
  double evaluate(double x, int order) const {
    const std::size_t nyq = n_ / 2;
    const Complex step = std::polar(1.0, x);
    Complex e = step;
    double acc = order == 0 ? coeffs_[0].real() : 0.0;
    for (std::size_t k = 1; k < nyq; ++k) {
      Complex term = coeffs_[k] * e;
      if (order == 1) term *= Complex(0.0, static_cast<double>(k));
      acc += 2.0 * term.real();
      e *= step;
    }
    const double kn = static_cast<double>(nyq);
    if (order == 0) {
      acc += coeffs_[nyq].real() * std::cos(kn * x);
    } else {
      acc -= coeffs_[nyq].real() * kn * std::sin(kn * x);
    }
    return acc;
  }

  std::size_t n_;
  std::vector<Complex> coeffs_;
};

/// Evaluates several real trigonometric series sharing the grid size at one
/// point: out[m] = sum_k w_k Re(c_m[k] e^{ikx}) over 0 <= k < N/2 with w_0 = 1
/// and w_k = 2 otherwise. Nyquist terms are left to the caller.
template <std::size_t M>
inline std::array<double, M> evaluate_series(const std::array<const Complex*, M>& coeffs,
                                             std::size_t half, double x) {
  std::array<double, M> out{};
  for (std::size_t m = 0; m < M; ++m) out[m] = coeffs[m][0].real();
  const Complex step = std::polar(1.0, x);
  Complex e = step;
  for (std::size_t k = 1; k < half; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      const Complex& c = coeffs[m][k];
      out[m] += 2.0 * (c.real() * e.real() - c.imag() * e.imag());
    }
    e *= step;
  }
  return out;
}

/// Band-limited resampling of periodic samples to a finer power-of-two grid
/// (zero padding in Fourier space). Sample i of the input lands on sample
/// i * (m / n) of the output.
inline std::vector<double> upsample(std::span<const double> values, std::size_t m) {
  const std::size_t n = values.size();
  if (m < n || m % n != 0) throw std::invalid_argument("upsample: target must be a multiple of the source size");
  auto coeffs = fft::forward(values);
  std::vector<Complex> padded(m / 2 + 1, Complex(0.0));
  for (std::size_t k = 0; k < coeffs.size(); ++k) padded[k] = coeffs[k];
  if (m > n) padded[n / 2] *= 0.5;  // split the source Nyquist term between +-n/2
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  for (auto& c : padded) c *= scale;
  return fft::inverse(padded, m);
}

}  // namespace epsflow::spectral
