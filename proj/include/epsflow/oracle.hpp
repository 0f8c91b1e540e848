#pragma once

// Reference solutions that share no code path with the PDE solver.

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "epsflow/curve.hpp"
#include "epsflow/energy.hpp"
#include "epsflow/errors.hpp"

namespace epsflow::oracle {

/// Local error tolerance of the scalar circle integrator.
inline constexpr double kOdeTolerance = 1e-12;
/// Radius below which the circle is considered extinct.
inline constexpr double kExtinctRadius = 1e-8;

/// Exact radius of a circle under curve shortening flow: sqrt(R0^2 - 2t).
inline double mcf_radius(double r0, double t) {
  if (!(r0 > 0.0)) throw std::invalid_argument("mcf_radius: R0 must be positive");
  if (!(t >= 0.0)) throw std::invalid_argument("mcf_radius: t must be non-negative");
  const double extinction = 0.5 * r0 * r0;
  if (!(t < extinction)) {
    std::ostringstream msg;
    msg << "mcf_radius: t = " << t << " is not before extinction time " << extinction;
    throw ExtinctionError(msg.str());
  }
  return std::sqrt(r0 * r0 - 2.0 * t);
}

/// Right-hand side of the circle reduction dR/dt = -(R^2 - eps) / R^3.
inline double circle_speed(double r, double eps) { return -(r * r - eps) / (r * r * r); }

/// Radius at time t of a circle evolving by the eps-flow, integrated with an
/// adaptive Fehlberg 7(8) pair.
inline double eps_radius(double r0, double eps, double t) {
  if (!(r0 > 0.0)) throw std::invalid_argument("eps_radius: R0 must be positive");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps_radius: epsilon must be non-negative");
  if (!(t >= 0.0)) throw std::invalid_argument("eps_radius: t must be non-negative");
  if (eps == 0.0 && !(t < 0.5 * r0 * r0)) {
    throw ExtinctionError("eps_radius: t beyond the extinction time of the eps = 0 circle");
  }
  // sqrt(eps) is a fixed point; return it untouched.
  if (eps > 0.0 && std::abs(r0 - std::sqrt(eps)) <= 4.0 * std::numeric_limits<double>::epsilon() * r0) {
    return r0;
  }
  if (t == 0.0) return r0;

  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  State r{r0};
  auto rhs = [eps](const State& y, State& dydt, double) {
    if (!(y[0] > kExtinctRadius)) throw ExtinctionError("eps_radius: radius collapsed");
    dydt[0] = circle_speed(y[0], eps);
  };
  auto stepper = odeint::make_controlled(kOdeTolerance, kOdeTolerance,
                                         odeint::runge_kutta_fehlberg78<State>());
  const double dt0 = std::min(1e-4, t);
  odeint::integrate_adaptive(stepper, rhs, r, 0.0, t, dt0);
  if (!(r[0] > kExtinctRadius)) throw ExtinctionError("eps_radius: radius collapsed");
  return r[0];
}

/// Energy 2 pi (R + eps / R) of a circle of radius R.
inline double circle_energy(double r, double eps) { return 2.0 * std::numbers::pi * (r + eps / r); }

struct GradientCheck {
  double finite_difference = 0.0;  // (G(+h) - G(-h)) / 2h
  double first_variation = 0.0;    // int E phi ds
  double discrepancy = 0.0;
};

/// Compares the central difference of G^eps along the normal perturbation
/// phi = cos(m x) nu with int E phi ds.
inline GradientCheck fd_gradient_check(const DiscreteCurve& curve, double eps, int mode, double h) {
  if (!(h >= 1e-5 && h <= 1e-2)) throw std::invalid_argument("fd_gradient_check: h must lie in [1e-5, 1e-2]");
  if (mode < 0) throw std::invalid_argument("fd_gradient_check: mode must be non-negative");
  const auto geo = geometry(curve);
  const std::size_t n = curve.size();
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) phi[i] = std::cos(static_cast<double>(mode) * curve.parameter(i));

  auto perturbed = [&](double sign) {
    std::vector<Point> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = curve[i] + (sign * h * phi[i]) * geo.normal[i];
    return DiscreteCurve(std::move(pts));
  };
  const double g_plus = functional(geometry(perturbed(+1.0)), eps);
  const double g_minus = functional(geometry(perturbed(-1.0)), eps);

  const auto e = first_variation(geo, eps);
  std::vector<double> integrand(n);
  for (std::size_t i = 0; i < n; ++i) integrand[i] = e[i] * phi[i];

  GradientCheck out;
  out.finite_difference = (g_plus - g_minus) / (2.0 * h);
  out.first_variation = integrate(geo, integrand);
  out.discrepancy = std::abs(out.finite_difference - out.first_variation);
  return out;
}

}  // namespace epsflow::oracle
