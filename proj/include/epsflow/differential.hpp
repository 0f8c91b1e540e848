#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epsflow/curve.hpp"
#include "epsflow/spectral.hpp"

namespace epsflow {

/// Highest derivative order accepted by param_derivative and d_ds.
inline constexpr int kMaxDerivativeOrder = 8;

namespace detail {
inline void check_order(int order) {
  if (order < 1 || order > kMaxDerivativeOrder) {
    throw std::invalid_argument("derivative order must lie in [1, " +
                                std::to_string(kMaxDerivativeOrder) + "], got " +
                                std::to_string(order));
  }
}
}  // namespace detail

/// Spectral d^order/dx^order of the trigonometric interpolant of `field`.
inline ScalarField param_derivative(std::span<const double> field, int order) {
  detail::check_order(order);
  if (!spectral::is_power_of_two(field.size())) {
    throw std::invalid_argument("param_derivative: field length must be a power of two");
  }
  for (double v : field) {
    if (!std::isfinite(v)) throw std::invalid_argument("param_derivative: non-finite value");
  }
  return spectral::derivative(field, order);
}

/// Arclength derivative of order `order`: (g^{-1} d/dx) applied `order` times.
/// The metric varies along the curve, so the operator is iterated rather than
/// applied as a single Fourier symbol.
inline ScalarField d_ds(const CurveGeometry& geo, std::span<const double> field, int order) {
  detail::check_order(order);
  if (field.size() != geo.size()) {
    throw std::invalid_argument("d_ds: field length does not match the curve");
  }
  ScalarField out(field.begin(), field.end());
  for (int j = 0; j < order; ++j) {
    auto coeffs = fft::forward(out);
    spectral::noise_filter(coeffs);
    spectral::differentiate_spectrum(coeffs, out.size(), 1);
    out = fft::inverse(coeffs, out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= geo.metric[i];
  }
  return out;
}

inline ScalarField d_ds(const DiscreteCurve& curve, std::span<const double> field, int order) {
  return d_ds(geometry(curve), field, order);
}

/// kappa, d_s kappa, ..., d_s^max_order kappa.
inline std::vector<ScalarField> curvature_jet(const CurveGeometry& geo, int max_order) {
  std::vector<ScalarField> jet;
  jet.reserve(static_cast<std::size_t>(max_order) + 1);
  jet.push_back(geo.curvature);
  for (int j = 1; j <= max_order; ++j) jet.push_back(d_ds(geo, jet.back(), 1));
  return jet;
}

}  // namespace epsflow
