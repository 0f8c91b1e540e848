#pragma once

// The functional G^eps(gamma) = int (1 + eps kappa^2) ds, its L2(ds) gradient
// and the closed-form evolution right-hand sides of the curvature quantities.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epsflow/curve.hpp"
#include "epsflow/differential.hpp"

namespace epsflow {

/// Highest j for which Q_j = int |d_s^j kappa|^2 ds is monitored.
inline constexpr int kMaxNormOrder = 4;

struct EnergyReport {
  double length = 0.0;
  double total_energy = 0.0;
  double int_k2 = 0.0;
  std::vector<double> q_norms;  // Q_0 .. Q_jmax, Q_0 == int_k2
  double max_abs_kappa = 0.0;
  double borsuk_lhs = 0.0;  // 1 / L
  double borsuk_rhs = 0.0;  // int kappa^2 ds / (4 pi^2)
};

namespace detail {
inline void check_epsilon(double eps) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("epsilon must be finite and non-negative");
  }
}
inline void check_norm_order(int j) {
  if (j < 0 || j > kMaxNormOrder) {
    throw std::invalid_argument("norm order must lie in [0, " + std::to_string(kMaxNormOrder) +
                                "], got " + std::to_string(j));
  }
}
inline double integrate_square(const CurveGeometry& geo, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * f[i] * geo.ds[i];
  return acc;
}
}  // namespace detail

inline double functional(const CurveGeometry& geo, double eps) {
  detail::check_epsilon(eps);
  double acc = 0.0;
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const double k = geo.curvature[i];
    acc += (1.0 + eps * k * k) * geo.ds[i];
  }
  return acc;
}

inline double functional(const DiscreteCurve& curve, double eps) {
  detail::check_epsilon(eps);
  return functional(geometry(curve), eps);
}

/// E = -kappa + 2 eps d_s^2 kappa + eps kappa^3; the flow moves with normal
/// velocity -E.
inline ScalarField first_variation(const CurveGeometry& geo, double eps) {
  detail::check_epsilon(eps);
  const auto& k = geo.curvature;
  ScalarField e(k.size());
  if (eps == 0.0) {
    for (std::size_t i = 0; i < k.size(); ++i) e[i] = -k[i];
    return e;
  }
  const auto kss = d_ds(geo, k, 2);
  for (std::size_t i = 0; i < k.size(); ++i) {
    e[i] = -k[i] + 2.0 * eps * kss[i] + eps * k[i] * k[i] * k[i];
  }
  return e;
}

inline ScalarField first_variation(const DiscreteCurve& curve, double eps) {
  detail::check_epsilon(eps);
  return first_variation(geometry(curve), eps);
}

inline double kappa_norm(const CurveGeometry& geo, int j) {
  detail::check_norm_order(j);
  if (j == 0) return detail::integrate_square(geo, geo.curvature);
  return detail::integrate_square(geo, d_ds(geo, geo.curvature, j));
}

inline double kappa_norm(const DiscreteCurve& curve, int j) {
  detail::check_norm_order(j);
  return kappa_norm(geometry(curve), j);
}

/// Expanded form of d_t kappa:
/// k'' + k^3 - 2 eps k'''' - 6 eps k (k')^2 - 5 eps k^2 k'' - eps k^5.
inline ScalarField dt_kappa_rhs(const CurveGeometry& geo, double eps) {
  detail::check_epsilon(eps);
  const auto jet = curvature_jet(geo, 4);
  const auto& k = jet[0];
  ScalarField out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double k1 = jet[1][i], k2 = jet[2][i], k4 = jet[4][i];
    const double kk = k[i] * k[i];
    out[i] = k2 + kk * k[i] -
             eps * (2.0 * k4 + 6.0 * k[i] * k1 * k1 + 5.0 * kk * k2 + kk * kk * k[i]);
  }
  return out;
}

inline ScalarField dt_kappa_rhs(const DiscreteCurve& curve, double eps) {
  detail::check_epsilon(eps);
  return dt_kappa_rhs(geometry(curve), eps);
}

/// Same quantity evaluated as -d_s^2 E - kappa^2 E.
inline ScalarField dt_kappa_rhs_compositional(const CurveGeometry& geo, double eps) {
  const auto e = first_variation(geo, eps);
  const auto ess = d_ds(geo, e, 2);
  ScalarField out(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double k = geo.curvature[i];
    out[i] = -ess[i] - k * k * e[i];
  }
  return out;
}

/// d/dt int kappa^2 ds =
/// int (-2 (k')^2 + k^4 - 4 eps (k'')^2 - eps k^6 - 4 eps k^3 k'') ds.
inline double dt_int_kappa2_rhs(const CurveGeometry& geo, double eps) {
  detail::check_epsilon(eps);
  const auto jet = curvature_jet(geo, 2);
  ScalarField integrand(geo.size());
  for (std::size_t i = 0; i < integrand.size(); ++i) {
    const double k = jet[0][i], k1 = jet[1][i], k2 = jet[2][i];
    const double k3 = k * k * k;
    integrand[i] = -2.0 * k1 * k1 + k3 * k - eps * (4.0 * k2 * k2 + k3 * k3 + 4.0 * k3 * k2);
  }
  return integrate(geo, integrand);
}

inline double dt_int_kappa2_rhs(const DiscreteCurve& curve, double eps) {
  detail::check_epsilon(eps);
  return dt_int_kappa2_rhs(geometry(curve), eps);
}

enum class InterpolationCase {
  p6m2,  // int u^6 against int (d_s^2 u)^2 and int u^2
  p4m1,  // int u^4 against int (d_s u)^2 and int u^2
};

/// Raw terms of the Gagliardo-Nirenberg type interpolation inequalities. The
/// constants are not known, so nothing is asserted here.
struct InterpolationReport {
  double lhs = 0.0;
  double grad_term = 0.0;
  double l2_term = 0.0;
  double length = 0.0;
};

inline InterpolationReport interpolation_report(const CurveGeometry& geo, std::span<const double> u,
                                                InterpolationCase which) {
  if (u.size() != geo.size()) throw std::invalid_argument("interpolation_report: field length mismatch");
  const int power = which == InterpolationCase::p6m2 ? 6 : 4;
  const int order = which == InterpolationCase::p6m2 ? 2 : 1;
  ScalarField up(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) up[i] = std::pow(u[i], power);
  InterpolationReport r;
  r.lhs = integrate(geo, up);
  r.grad_term = detail::integrate_square(geo, d_ds(geo, u, order));
  r.l2_term = detail::integrate_square(geo, u);
  r.length = geo.length;
  return r;
}

/// Shape x^(2j+3) + x^(2j+5) + 1 of the a-priori bound on d_t Q_j in terms of
/// x = int kappa^2 ds, with unit constants.
inline double apriori_bound_rhs(double int_k2, int j) {
  detail::check_norm_order(j);
  if (!(int_k2 >= 0.0)) throw std::invalid_argument("apriori_bound_rhs: int_k2 must be non-negative");
  return std::pow(int_k2, 2 * j + 3) + std::pow(int_k2, 2 * j + 5) + 1.0;
}

inline EnergyReport energy_report(const CurveGeometry& geo, double eps, int j_max = kMaxNormOrder) {
  detail::check_epsilon(eps);
  detail::check_norm_order(j_max);
  EnergyReport r;
  r.length = geo.length;
  r.total_energy = functional(geo, eps);
  const auto jet = curvature_jet(geo, j_max);
  for (const auto& f : jet) r.q_norms.push_back(detail::integrate_square(geo, f));
  r.int_k2 = r.q_norms[0];
  for (double k : geo.curvature) r.max_abs_kappa = std::max(r.max_abs_kappa, std::abs(k));
  r.borsuk_lhs = 1.0 / geo.length;
  r.borsuk_rhs = r.int_k2 / (4.0 * std::numbers::pi * std::numbers::pi);
  return r;
}

inline EnergyReport energy_report(const DiscreteCurve& curve, double eps, int j_max = kMaxNormOrder) {
  return energy_report(geometry(curve), eps, j_max);
}

}  // namespace epsflow
