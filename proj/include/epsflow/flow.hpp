#pragma once

// Time integration of d_t gamma = -E^eps nu on closed plane curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "epsflow/curve.hpp"
#include "epsflow/differential.hpp"
#include "epsflow/energy.hpp"
#include "epsflow/errors.hpp"
#include "epsflow/fft.hpp"
#include "epsflow/spectral.hpp"

namespace epsflow {

enum class Scheme { explicit_rk4, imex };

enum class RunStatus { reached_tmax, singularity_kappa, singularity_length, resolution_lost };

inline std::string_view to_string(Scheme s) {
  return s == Scheme::explicit_rk4 ? "explicit_rk4" : "imex";
}

inline std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::reached_tmax: return "reached_tmax";
    case RunStatus::singularity_kappa: return "singularity_kappa";
    case RunStatus::singularity_length: return "singularity_length";
    case RunStatus::resolution_lost: return "resolution_lost";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "explicit_rk4") return Scheme::explicit_rk4;
  if (s == "imex") return Scheme::imex;
  throw std::invalid_argument("unknown scheme '" + std::string(s) + "'");
}

/// Guards the 1/eps in the fourth-order time step bound.
inline constexpr double kEpsilonFloor = 1e-12;

struct FlowConfig {
  double epsilon = 0.0;
  std::size_t n_points = 0;  // 0: whatever the initial curve has
  Scheme scheme = Scheme::explicit_rk4;
  double cfl_second = 0.15;
  double cfl_fourth = 0.005;
  int reparam_every = 20;  // 0 disables regridding
  double t_max = 1.0;
  double stop_max_kappa = 500.0;  // compared against max|kappa| * initial length
  double stop_min_length = 1e-3;
  int snapshot_every = 0;  // 0 disables snapshots
  double fixed_dt = 0.0;   // > 0 replaces the stability-based step
  std::vector<double> output_times;  // the run lands exactly on these and keeps the state

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("FlowConfig: ") + name + " must be positive");
      }
    };
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw std::invalid_argument("FlowConfig: epsilon must be finite and non-negative");
    }
    positive(cfl_second, "cfl_second");
    positive(cfl_fourth, "cfl_fourth");
    positive(t_max, "t_max");
    positive(stop_max_kappa, "stop_max_kappa");
    positive(stop_min_length, "stop_min_length");
    if (reparam_every < 0) throw std::invalid_argument("FlowConfig: reparam_every must be >= 0");
    if (snapshot_every < 0) throw std::invalid_argument("FlowConfig: snapshot_every must be >= 0");
    if (fixed_dt < 0.0 || !std::isfinite(fixed_dt)) {
      throw std::invalid_argument("FlowConfig: fixed_dt must be >= 0");
    }
    if (n_points != 0 && (n_points < DiscreteCurve::kMinPoints || !spectral::is_power_of_two(n_points))) {
      throw std::invalid_argument("FlowConfig: n_points must be a power of two >= 16");
    }
    for (std::size_t i = 0; i < output_times.size(); ++i) {
      if (!(output_times[i] > 0.0) || (i > 0 && !(output_times[i] > output_times[i - 1]))) {
        throw std::invalid_argument("FlowConfig: output_times must be positive and increasing");
      }
    }
  }
};

struct DiagnosticsRecord {
  double t = 0.0;
  double dt = 0.0;
  double length = 0.0;
  double energy = 0.0;
  double int_k2 = 0.0;
  std::array<double, 4> q{};  // Q_1 .. Q_4
  double max_abs_kappa = 0.0;
  int turning_number = 0;
};

inline DiagnosticsRecord make_diagnostics(const CurveGeometry& geo, double eps, double t, double dt) {
  const auto report = energy_report(geo, eps, kMaxNormOrder);
  DiagnosticsRecord d;
  d.t = t;
  d.dt = dt;
  d.length = report.length;
  d.energy = report.total_energy;
  d.int_k2 = report.int_k2;
  for (std::size_t j = 0; j < d.q.size(); ++j) d.q[j] = report.q_norms[j + 1];
  d.max_abs_kappa = report.max_abs_kappa;
  d.turning_number = turning_number(geo);
  return d;
}

struct FlowState {
  DiscreteCurve curve;
  double t = 0.0;
  std::size_t step_index = 0;
  double dt_last = 0.0;
  DiagnosticsRecord diagnostics;
};

inline FlowState make_state(DiscreteCurve curve, double eps, double t = 0.0, std::size_t step = 0,
                            double dt = 0.0) {
  auto diag = make_diagnostics(geometry(curve), eps, t, dt);
  return FlowState{std::move(curve), t, step, dt, diag};
}

struct Snapshot {
  std::size_t step = 0;
  double t = 0.0;
  DiscreteCurve curve;
};

struct Trajectory {
  std::vector<DiagnosticsRecord> records;
  std::vector<Snapshot> snapshots;
  std::vector<FlowState> checkpoints;
  std::vector<std::size_t> reparam_steps;  // steps after which the grid was redistributed
  RunStatus status = RunStatus::reached_tmax;
  std::optional<FlowState> final_state;
  double initial_length = 0.0;
};

/// Normal velocity -E nu at every node.
inline std::vector<Point> flow_velocity(const CurveGeometry& geo, double eps) {
  const auto e = first_variation(geo, eps);
  std::vector<Point> v(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) v[i] = (-e[i]) * geo.normal[i];
  return v;
}

inline std::vector<Point> flow_velocity(const DiscreteCurve& curve, double eps) {
  return flow_velocity(geometry(curve), eps);
}

inline double min_spacing(const CurveGeometry& geo) {
  return *std::ranges::min_element(geo.ds);
}

inline double stable_dt(const CurveGeometry& geo, const FlowConfig& config) {
  const double h = min_spacing(geo);
  if (!(h > 0.0)) throw ResolutionError("stable_dt: zero arclength spacing");
  const double second = config.cfl_second * h * h;
  if (config.scheme == Scheme::imex) {
    // The implicit operator uses the mean metric, so on a nonuniform grid the
    // leftover 2 eps (g^-4 - gbar^-4) d_x^4 is explicit and needs its own limit.
    if (config.epsilon == 0.0) return second;
    const double gbar = geo.length / (2.0 * std::numbers::pi);
    double residual = 0.0;
    for (double g : geo.metric) residual = std::max(residual, std::abs(std::pow(g, -4) - std::pow(gbar, -4)));
    if (residual == 0.0) return second;
    const double dx = 2.0 * std::numbers::pi / static_cast<double>(geo.size());
    return std::min(second, config.cfl_fourth * std::pow(dx, 4) / (config.epsilon * residual));
  }
  const double fourth = config.cfl_fourth * h * h * h * h / std::max(config.epsilon, kEpsilonFloor);
  return std::min(second, fourth);
}

inline double stable_dt(const FlowState& state, const FlowConfig& config) {
  return stable_dt(geometry(state.curve), config);
}

namespace detail {

inline DiscreteCurve displaced(const DiscreteCurve& base, double scale,
                               std::initializer_list<std::pair<double, const std::vector<Point>*>> terms) {
  std::vector<Point> pts = base.points();
  for (const auto& [weight, field] : terms) {
    if (weight == 0.0) continue;
    const double w = scale * weight;
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = pts[i] + w * (*field)[i];
  }
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ResolutionError("non-finite node position");
  }
  return DiscreteCurve(std::move(pts));
}

inline DiscreteCurve rk4_step(const DiscreteCurve& u, double eps, double dt) {
  const auto k1 = flow_velocity(u, eps);
  const auto k2 = flow_velocity(displaced(u, dt, {{0.5, &k1}}), eps);
  const auto k3 = flow_velocity(displaced(u, dt, {{0.5, &k2}}), eps);
  const auto k4 = flow_velocity(displaced(u, dt, {{1.0, &k3}}), eps);
  return displaced(u, dt / 6.0, {{1.0, &k1}, {2.0, &k2}, {2.0, &k3}, {1.0, &k4}});
}

// ARS(4,4,3): L-stable, stiffly accurate, third order.
inline constexpr std::size_t kImexStages = 5;
inline constexpr double kImexExplicit[kImexStages][kImexStages] = {
    {0.0, 0.0, 0.0, 0.0, 0.0},
    {1.0 / 2.0, 0.0, 0.0, 0.0, 0.0},
    {11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0},
    {5.0 / 6.0, -5.0 / 6.0, 1.0 / 2.0, 0.0, 0.0},
    {1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0},
};
inline constexpr double kImexImplicit[kImexStages][kImexStages] = {
    {0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0, 1.0 / 2.0, 0.0, 0.0, 0.0},
    {0.0, 1.0 / 6.0, 1.0 / 2.0, 0.0, 0.0},
    {0.0, -1.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0, 0.0},
    {0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0},
};

/// The stiff operator L = -2 eps gbar^-4 d_x^4 acting on both coordinates,
/// diagonal in Fourier space.
class StiffOperator {
 public:
  StiffOperator(std::size_t n, double eps, double mean_metric) : n_(n), symbol_(n / 2 + 1) {
    const double g4 = std::pow(mean_metric, 4);
    for (std::size_t k = 0; k < symbol_.size(); ++k) {
      const double kk = static_cast<double>(k);
      symbol_[k] = -2.0 * eps * kk * kk * kk * kk / g4;
    }
  }

  std::vector<Point> apply(const std::vector<Point>& u) const {
    return transform(u, [&](std::size_t k) { return symbol_[k]; });
  }

  /// Solves (I - factor * L) v = rhs.
  std::vector<Point> solve(const std::vector<Point>& rhs, double factor) const {
    return transform(rhs, [&](std::size_t k) { return 1.0 / (1.0 - factor * symbol_[k]); });
  }

 private:
  template <class Multiplier>
  std::vector<Point> transform(const std::vector<Point>& u, Multiplier mult) const {
    std::vector<double> xs(n_), ys(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      xs[i] = u[i].x;
      ys[i] = u[i].y;
    }
    auto xh = fft::forward(xs);
    auto yh = fft::forward(ys);
    for (std::size_t k = 0; k < xh.size(); ++k) {
      const double m = mult(k);
      xh[k] *= m;
      yh[k] *= m;
    }
    xs = fft::inverse(xh, n_);
    ys = fft::inverse(yh, n_);
    std::vector<Point> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = {xs[i], ys[i]};
    return out;
  }

  std::size_t n_;
  std::vector<double> symbol_;
};

inline DiscreteCurve imex_step(const DiscreteCurve& u, double eps, double dt) {
  const std::size_t n = u.size();
  const auto geo0 = geometry(u);
  const StiffOperator stiff(n, eps, geo0.length / (2.0 * std::numbers::pi));

  std::array<std::vector<Point>, kImexStages> explicit_part;  // F(U_j) - L U_j
  std::array<std::vector<Point>, kImexStages> implicit_part;  // L U_j
  std::optional<DiscreteCurve> stage;

  for (std::size_t i = 0; i < kImexStages; ++i) {
    std::vector<Point> rhs = u.points();
    for (std::size_t j = 0; j < i; ++j) {
      const double ae = dt * kImexExplicit[i][j];
      const double ai = dt * kImexImplicit[i][j];
      for (std::size_t p = 0; p < n; ++p) {
        rhs[p] = rhs[p] + ae * explicit_part[j][p] + ai * implicit_part[j][p];
      }
    }
    const double diag = dt * kImexImplicit[i][i];
    std::vector<Point> value;
    if (diag == 0.0) {
      value = std::move(rhs);
      implicit_part[i] = stiff.apply(value);
    } else {
      value = stiff.solve(rhs, diag);
      implicit_part[i].resize(n);
      for (std::size_t p = 0; p < n; ++p) implicit_part[i][p] = (1.0 / diag) * (value[p] - rhs[p]);
    }
    for (const auto& pt : value) {
      if (!std::isfinite(pt.x) || !std::isfinite(pt.y)) throw ResolutionError("non-finite node position");
    }
    stage.emplace(std::move(value));
    if (i + 1 == kImexStages) break;  // stiffly accurate: the last stage is the update
    auto vel = i == 0 ? flow_velocity(geo0, eps) : flow_velocity(*stage, eps);
    for (std::size_t p = 0; p < n; ++p) vel[p] = vel[p] - implicit_part[i][p];
    explicit_part[i] = std::move(vel);
  }
  return std::move(*stage);
}

}  // namespace detail

namespace detail {
// Damps the top of the spectrum. Explicit stepping of a purely normal law
// leaves the tangential sawtooth mode slightly unstable; this removes it at
// every regrid.
inline DiscreteCurve filtered(const DiscreteCurve& c) {
  const std::size_t n = c.size();
  auto xh = fft::forward(c.xs());
  auto yh = fft::forward(c.ys());
  spectral::exponential_filter(xh, n);
  spectral::exponential_filter(yh, n);
  return DiscreteCurve::from_coordinates(fft::inverse(xh, n), fft::inverse(yh, n));
}
}  // namespace detail

/// Advances by exactly `dt`.
inline FlowState step(const FlowState& state, const FlowConfig& config, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step: dt must be positive");
  DiscreteCurve next = config.scheme == Scheme::explicit_rk4
                           ? detail::rk4_step(state.curve, config.epsilon, dt)
                           : detail::imex_step(state.curve, config.epsilon, dt);
  return make_state(std::move(next), config.epsilon, state.t + dt, state.step_index + 1, dt);
}

/// Advances by the configured step (fixed_dt, or stable_dt).
inline FlowState step(const FlowState& state, const FlowConfig& config) {
  const double dt = config.fixed_dt > 0.0 ? config.fixed_dt : stable_dt(state, config);
  return step(state, config, dt);
}

/// Redistributes the nodes uniformly in arclength along the trigonometric
/// interpolant, keeping node 0 in place. The flow is purely normal, so this
/// changes only the parametrization, not the geometry.
inline DiscreteCurve reparametrize(const DiscreteCurve& curve) {
  using fft::Complex;
  const std::size_t n = curve.size();
  const std::size_t half = n / 2;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto geo = geometry(curve);

  auto normalized = [&](std::span<const double> f) {
    auto c = fft::forward(f);
    for (auto& v : c) v *= inv_n;
    return c;
  };
  const auto xc = normalized(curve.xs());
  const auto yc = normalized(curve.ys());
  const auto gc = normalized(geo.metric);
  const double gbar = gc[0].real();
  const double two_pi = 2.0 * std::numbers::pi;
  const double length = two_pi * gbar;

  // s(x) = gbar x + P(x) - P(0), P the antiderivative of the oscillating part
  // of g. The Nyquist term of g integrates to a multiple of sin(N x / 2).
  std::vector<Complex> pc(half + 1, Complex(0.0));
  for (std::size_t k = 1; k < half; ++k) pc[k] = gc[k] / Complex(0.0, static_cast<double>(k));
  double p0 = 0.0;
  for (std::size_t k = 1; k < half; ++k) p0 += 2.0 * pc[k].real();
  const double g_nyq = gc[half].real();
  const double kn = static_cast<double>(half);

  auto arclength_and_speed = [&](double x) {
    const auto v = spectral::evaluate_series<2>({pc.data(), gc.data()}, half, x);
    const double s = gbar * x + v[0] - p0 + g_nyq * std::sin(kn * x) / kn;
    const double g = v[1] + g_nyq * std::cos(kn * x);
    return std::pair{s, g};
  };

  // Arclength at the nodes from one inverse transform.
  std::vector<double> s_nodes(n + 1);
  {
    std::vector<Complex> scaled(pc.begin(), pc.end());
    for (auto& v : scaled) v *= static_cast<double>(n);
    const auto periodic = fft::inverse(scaled, n);
    for (std::size_t i = 0; i < n; ++i) s_nodes[i] = gbar * curve.parameter(i) + periodic[i] - p0;
  }
  s_nodes[0] = 0.0;
  s_nodes[n] = length;

  std::vector<Point> pts(n);
  pts[0] = curve[0];
  std::size_t seg = 0;
  const double dx = two_pi / static_cast<double>(n);
  for (std::size_t j = 1; j < n; ++j) {
    const double target = length * static_cast<double>(j) / static_cast<double>(n);
    while (seg + 1 < n && s_nodes[seg + 1] <= target) ++seg;
    double lo = dx * static_cast<double>(seg);
    double hi = lo + dx;
    double x = lo + dx * (target - s_nodes[seg]) / (s_nodes[seg + 1] - s_nodes[seg]);
    // Safeguarded Newton on s(x) = target; s' = g > 0.
    for (int it = 0; it < 50; ++it) {
      const auto [s, g] = arclength_and_speed(x);
      const double f = s - target;
      if (f > 0.0) hi = x; else lo = x;
      double next = x - f / g;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const double delta = std::abs(next - x);
      x = next;
      if (delta < 1e-15) break;
    }
    const auto v = spectral::evaluate_series<2>({xc.data(), yc.data()}, half, x);
    const double nyq = std::cos(kn * x);
    pts[j] = {v[0] + xc[half].real() * nyq, v[1] + yc[half].real() * nyq};
  }
  return DiscreteCurve(std::move(pts));
}

/// Grid maintenance applied every reparam_every steps: spectral filter, then
/// uniform-arclength redistribution.
inline DiscreteCurve regrid(const DiscreteCurve& curve) { return reparametrize(detail::filtered(curve)); }

/// Optional per-step callback, invoked with every accepted state (including the
/// initial one).
using StepObserver = std::function<void(const FlowState&)>;

inline Trajectory run(const DiscreteCurve& initial, const FlowConfig& config,
                      const StepObserver& observer = {}) {
  config.validate();
  if (config.n_points != 0 && config.n_points != initial.size()) {
    throw std::invalid_argument("run: initial curve has " + std::to_string(initial.size()) +
                                " nodes, config expects " + std::to_string(config.n_points));
  }
  const double eps = config.epsilon;

  FlowState state = make_state(config.reparam_every > 0 ? regrid(initial) : initial, eps);
  Trajectory traj;
  traj.initial_length = state.diagnostics.length;
  const double length0 = traj.initial_length;

  auto stop_reason = [&](const DiagnosticsRecord& d) -> std::optional<RunStatus> {
    if (d.max_abs_kappa * length0 > config.stop_max_kappa) return RunStatus::singularity_kappa;
    if (d.length < config.stop_min_length) return RunStatus::singularity_length;
    return std::nullopt;
  };
  if (auto reason = stop_reason(state.diagnostics)) {
    throw std::invalid_argument("run: initial curve already meets the stop condition " +
                                std::string(to_string(*reason)));
  }

  traj.records.push_back(state.diagnostics);
  if (config.snapshot_every > 0) traj.snapshots.push_back({0, 0.0, state.curve});
  if (observer) observer(state);

  std::size_t next_output = 0;
  const double t_end = config.t_max;
  // Targets closer than this are considered reached (guards against a
  // vanishing final step from rounding).
  const double t_slack = 1e-13 * std::max(1.0, t_end);

  while (true) {
    if (state.t >= t_end - t_slack) {
      traj.status = RunStatus::reached_tmax;
      break;
    }
    double target = t_end;
    while (next_output < config.output_times.size() && config.output_times[next_output] <= state.t + t_slack) {
      ++next_output;
    }
    if (next_output < config.output_times.size()) target = std::min(target, config.output_times[next_output]);

    FlowState next = state;
    try {
      double dt = config.fixed_dt > 0.0 ? config.fixed_dt : stable_dt(state, config);
      const bool lands = state.t + dt >= target - t_slack;
      if (lands) dt = target - state.t;
      next = step(state, config, dt);
      if (lands) next.t = target;
      next.diagnostics.t = next.t;
      if (config.reparam_every > 0 && next.step_index % static_cast<std::size_t>(config.reparam_every) == 0) {
        next = make_state(regrid(next.curve), eps, next.t, next.step_index, next.dt_last);
        traj.reparam_steps.push_back(next.step_index);
      }
    } catch (const ResolutionError&) {
      traj.status = RunStatus::resolution_lost;
      break;
    } catch (const std::invalid_argument&) {
      // Node collision inside a stage: the grid no longer resolves the curve.
      traj.status = RunStatus::resolution_lost;
      break;
    }
    if (!std::isfinite(next.diagnostics.energy) || !std::isfinite(next.diagnostics.max_abs_kappa)) {
      traj.status = RunStatus::resolution_lost;
      break;
    }
    state = std::move(next);
    traj.records.push_back(state.diagnostics);
    if (config.snapshot_every > 0 && state.step_index % static_cast<std::size_t>(config.snapshot_every) == 0) {
      traj.snapshots.push_back({state.step_index, state.t, state.curve});
    }
    if (next_output < config.output_times.size() && state.t == config.output_times[next_output]) {
      traj.checkpoints.push_back(state);
      ++next_output;
    }
    if (observer) observer(state);
    if (auto reason = stop_reason(state.diagnostics)) {
      traj.status = *reason;
      break;
    }
  }
  traj.final_state = std::move(state);
  return traj;
}

}  // namespace epsflow
