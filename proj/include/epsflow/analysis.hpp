#pragma once

// Experiments built on the flow: eps -> 0 convergence, identity audits,
// inequality audits and the Q-doubling probe.

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "epsflow/curve.hpp"
#include "epsflow/differential.hpp"
#include "epsflow/energy.hpp"
#include "epsflow/errors.hpp"
#include "epsflow/flow.hpp"
#include "epsflow/oracle.hpp"
#include "epsflow/spectral.hpp"

namespace epsflow::analysis {

struct RunSummary {
  double epsilon = 0.0;
  RunStatus status = RunStatus::reached_tmax;
  std::size_t steps = 0;
  double t_final = 0.0;
};

struct ConvergenceStudy {
  std::string initial;
  std::vector<double> epsilons;  // strictly decreasing
  std::vector<double> times;
  // d[e][t]: sup-distance to the eps = 0 reference; d_kappa[e][t]: max node
  // curvature difference. NaN where a run did not reach the sample time.
  std::vector<std::vector<double>> d;
  std::vector<std::vector<double>> d_kappa;
  std::vector<RunSummary> runs;
  RunSummary reference;

  /// True when every column of `table` decreases strictly as eps decreases.
  static bool strictly_decreasing(const std::vector<std::vector<double>>& table) {
    for (std::size_t t = 0; table.size() > 0 && t < table.front().size(); ++t) {
      for (std::size_t e = 1; e < table.size(); ++e) {
        if (!(table[e][t] < table[e - 1][t])) return false;
      }
    }
    return true;
  }
  bool distance_decreasing() const { return strictly_decreasing(d); }
  bool curvature_decreasing() const { return strictly_decreasing(d_kappa); }
};

namespace detail {

inline DiscreteCurve refine(const DiscreteCurve& curve, std::size_t factor) {
  const std::size_t m = curve.size() * factor;
  return DiscreteCurve::from_coordinates(spectral::upsample(curve.xs(), m), spectral::upsample(curve.ys(), m));
}

inline DiscreteCurve every_nth(const DiscreteCurve& curve, std::size_t stride) {
  std::vector<Point> pts;
  pts.reserve(curve.size() / stride);
  for (std::size_t i = 0; i < curve.size(); i += stride) pts.push_back(curve[i]);
  return DiscreteCurve(std::move(pts));
}

inline RunSummary summarize(const Trajectory& traj, double eps) {
  return {eps, traj.status, traj.final_state->step_index, traj.final_state->t};
}

}  // namespace detail

/// Runs the eps-flows and an eps = 0 reference from the same initial curve and
/// tabulates their distance at the sample times. The reference runs at twice
/// the resolution (and therefore a quarter of the step under the h^2 rule).
inline ConvergenceStudy convergence_study(const DiscreteCurve& initial, const std::string& descriptor,
                                          const std::vector<double>& epsilons,
                                          const std::vector<double>& sample_times, const FlowConfig& config) {
  if (epsilons.empty()) throw std::invalid_argument("convergence_study: epsilon list is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) {
      throw std::invalid_argument("convergence_study: every epsilon must lie in (0, 1)");
    }
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw std::invalid_argument("convergence_study: epsilon list must be strictly decreasing");
    }
  }
  if (sample_times.empty()) throw std::invalid_argument("convergence_study: no sample times");

  FlowConfig base = config;
  base.output_times = sample_times;
  base.t_max = sample_times.back();
  base.n_points = 0;
  base.validate();

  FlowConfig ref_config = base;
  ref_config.epsilon = 0.0;
  if (ref_config.fixed_dt > 0.0) ref_config.fixed_dt *= 0.25;
  const DiscreteCurve fine = detail::refine(initial, 2);

  // The reference decides feasibility, so it runs first.
  const Trajectory reference = run(fine, ref_config);
  if (reference.checkpoints.size() != sample_times.size()) {
    throw SingularityError("convergence_study: reference flow stopped (" +
                           std::string(to_string(reference.status)) + ") at t = " +
                           std::to_string(reference.final_state->t) + " before the last sample time");
  }

  std::vector<std::future<Trajectory>> jobs;
  for (double eps : epsilons) {
    FlowConfig c = base;
    c.epsilon = eps;
    jobs.push_back(std::async(std::launch::async, [&initial, c] { return run(initial, c); }));
  }

  const bool regrid = base.reparam_every > 0;
  auto comparable = [regrid](const DiscreteCurve& c) { return regrid ? reparametrize(c) : c; };

  std::vector<DiscreteCurve> ref_curves;
  std::vector<ScalarField> ref_kappa;
  for (const auto& cp : reference.checkpoints) {
    const auto coarse = detail::every_nth(comparable(cp.curve), 2);
    ref_kappa.push_back(geometry(coarse).curvature);
    ref_curves.push_back(coarse);
  }

  ConvergenceStudy study;
  study.initial = descriptor;
  study.epsilons = epsilons;
  study.times = sample_times;
  study.reference = detail::summarize(reference, 0.0);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t e = 0; e < jobs.size(); ++e) {
    const Trajectory traj = jobs[e].get();
    study.runs.push_back(detail::summarize(traj, epsilons[e]));
    std::vector<double> row(sample_times.size(), nan), row_k(sample_times.size(), nan);
    for (std::size_t t = 0; t < traj.checkpoints.size(); ++t) {
      const auto c = comparable(traj.checkpoints[t].curve);
      row[t] = sup_distance(c, ref_curves[t]);
      const auto k = geometry(c).curvature;
      double dk = 0.0;
      for (std::size_t i = 0; i < k.size(); ++i) dk = std::max(dk, std::abs(k[i] - ref_kappa[t][i]));
      row_k[t] = dk;
    }
    study.d.push_back(std::move(row));
    study.d_kappa.push_back(std::move(row_k));
  }
  return study;
}

// Gradient consistency -------------------------------------------------------

/// Below this both discrepancies count as roundoff and no ratio is formed.
/// Symmetric perturbations (a circle under mode m >= 1, or a centred ellipse
/// under an odd mode) make G(+h) and G(-h) equal, so the central difference
/// has no h^2 term at all.
inline constexpr double kGradientFloor = 1e-9;

struct GradientOrder {
  oracle::GradientCheck coarse;  // step h
  oracle::GradientCheck fine;    // step h / 2
  double ratio = 0.0;
  bool at_floor = false;
  bool passed = false;
};

inline GradientOrder gradient_order(const DiscreteCurve& curve, double eps, int mode, double h) {
  GradientOrder out;
  out.coarse = oracle::fd_gradient_check(curve, eps, mode, h);
  out.fine = oracle::fd_gradient_check(curve, eps, mode, 0.5 * h);
  out.at_floor = out.coarse.discrepancy < kGradientFloor && out.fine.discrepancy < kGradientFloor;
  out.ratio = out.coarse.discrepancy / out.fine.discrepancy;
  out.passed = out.at_floor || (out.ratio >= 3.5 && out.ratio <= 4.5);
  return out;
}

// Identity audits -----------------------------------------------------------

struct IdentityResiduals {
  double t_mid = 0.0;
  double delta = 0.0;     // half-width of the central difference
  double r_kappa = 0.0;   // max over nodes |d_t kappa (diff) - rhs|
  double r_int_k2 = 0.0;  // |d_t int kappa^2 (diff) - rhs|
};

/// Compares central time differences over three consecutive snapshots with the
/// closed-form evolution laws evaluated at the middle one. The window is the
/// valid one whose middle snapshot is closest to `t_center` (the first valid
/// one if not given).
inline IdentityResiduals identity_residuals(const Trajectory& traj, double eps,
                                            std::optional<double> t_center = std::nullopt) {
  const auto& snaps = traj.snapshots;
  std::optional<std::size_t> best;
  for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
    const std::size_t a = snaps[k - 1].step, b = snaps[k].step, c = snaps[k + 1].step;
    if (b - a != c - b) continue;
    const bool regridded = std::ranges::any_of(traj.reparam_steps, [&](std::size_t s) { return s > a && s <= c; });
    if (regridded) continue;
    const double dt0 = traj.records[a + 1].dt;
    bool constant = true;
    for (std::size_t s = a + 1; s <= c; ++s) {
      if (std::abs(traj.records[s].dt - dt0) > 1e-9 * dt0) constant = false;
    }
    if (!constant) continue;
    if (!t_center) {
      best = k;
      break;
    }
    if (!best || std::abs(snaps[k].t - *t_center) < std::abs(snaps[*best].t - *t_center)) best = k;
  }
  if (!best) {
    throw AuditError("identity audit: no window of three equally spaced snapshots at constant dt "
                     "free of reparametrization");
  }
  const std::size_t k = *best;
  const auto g0 = geometry(snaps[k - 1].curve);
  const auto g1 = geometry(snaps[k].curve);
  const auto g2 = geometry(snaps[k + 1].curve);
  const double span = snaps[k + 1].t - snaps[k - 1].t;

  IdentityResiduals r;
  r.t_mid = snaps[k].t;
  r.delta = 0.5 * span;
  const auto rhs = dt_kappa_rhs(g1, eps);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const double diff = (g2.curvature[i] - g0.curvature[i]) / span;
    r.r_kappa = std::max(r.r_kappa, std::abs(diff - rhs[i]));
  }
  const double diff_int = (kappa_norm(g2, 0) - kappa_norm(g0, 0)) / span;
  r.r_int_k2 = std::abs(diff_int - dt_int_kappa2_rhs(g1, eps));
  return r;
}

struct IdentityAudit {
  IdentityResiduals coarse;  // at the configured dt
  IdentityResiduals fine;    // at dt / 2, same window centre
  double ratio_kappa = 0.0;
  double ratio_int_k2 = 0.0;
};

/// Runs the configured flow at fixed_dt and fixed_dt / 2 with the same
/// snapshot cadence, so the differencing width halves too, and reports
/// residuals and refinement ratios for the window centred at `t_center`
/// (default snapshot_every * fixed_dt). `t_center` should be a multiple of
/// snapshot_every * fixed_dt.
inline IdentityAudit identity_audit(const DiscreteCurve& initial, const FlowConfig& config,
                                    std::optional<double> t_center = std::nullopt) {
  if (!(config.fixed_dt > 0.0) || config.snapshot_every <= 0) {
    throw std::invalid_argument("identity_audit: needs fixed_dt > 0 and snapshot_every > 0");
  }
  const double width = config.fixed_dt * config.snapshot_every;
  const double centre = t_center.value_or(width);
  if (!(centre >= width)) throw std::invalid_argument("identity_audit: window centre before the first snapshot");
  FlowConfig c = config;
  c.t_max = centre + width;
  c.output_times.clear();
  const auto coarse = identity_residuals(run(initial, c), c.epsilon, centre);
  c.fixed_dt = 0.5 * config.fixed_dt;
  const auto fine = identity_residuals(run(initial, c), c.epsilon, centre);
  return {coarse, fine, coarse.r_kappa / fine.r_kappa, coarse.r_int_k2 / fine.r_int_k2};
}

// Trajectory audits -----------------------------------------------------------

/// Largest increase of G^eps between consecutive records (negative when the
/// energy decreased everywhere).
inline double monotonicity_audit(const Trajectory& traj) {
  if (traj.records.empty()) throw AuditError("monotonicity audit: empty trajectory");
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < traj.records.size(); ++i) {
    worst = std::max(worst, traj.records[i].energy - traj.records[i - 1].energy);
  }
  return traj.records.size() == 1 ? 0.0 : worst;
}

struct BoundAudit {
  // C_j = max over steps of (Q_j difference quotient) / apriori_bound_rhs(int_k2, j)
  std::array<double, kMaxNormOrder + 1> fitted_constants{};
  double borsuk_margin = std::numeric_limits<double>::infinity();           // min(rhs - lhs)
  double borsuk_relative_margin = std::numeric_limits<double>::infinity();  // min((rhs - lhs) / rhs)
};

inline double borsuk_lhs(const DiagnosticsRecord& d) { return 1.0 / d.length; }
inline double borsuk_rhs(const DiagnosticsRecord& d) {
  return d.int_k2 / (4.0 * std::numbers::pi * std::numbers::pi);
}

inline BoundAudit bound_audit(const Trajectory& traj) {
  const auto& recs = traj.records;
  if (recs.size() < 2) throw AuditError("bound audit: need at least two samples");
  auto q = [](const DiagnosticsRecord& d, std::size_t j) { return j == 0 ? d.int_k2 : d.q[j - 1]; };
  BoundAudit out;
  out.fitted_constants.fill(-std::numeric_limits<double>::infinity());
  for (const auto& d : recs) {
    const double gap = borsuk_rhs(d) - borsuk_lhs(d);
    out.borsuk_margin = std::min(out.borsuk_margin, gap);
    out.borsuk_relative_margin = std::min(out.borsuk_relative_margin, gap / borsuk_rhs(d));
  }
  for (std::size_t i = 1; i < recs.size(); ++i) {
    const double dt = recs[i].t - recs[i - 1].t;
    for (std::size_t j = 0; j <= kMaxNormOrder; ++j) {
      const double rate = (q(recs[i], j) - q(recs[i - 1], j)) / dt;
      const double shape = apriori_bound_rhs(recs[i - 1].int_k2, static_cast<int>(j));
      out.fitted_constants[j] = std::max(out.fitted_constants[j], rate / shape);
    }
  }
  return out;
}

/// Q^1 = int (1 + (d_s kappa)^2 + kappa^4) ds.
inline double q_one(const CurveGeometry& geo) {
  const auto k1 = d_ds(geo, geo.curvature, 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < geo.size(); ++i) {
    const double k2 = geo.curvature[i] * geo.curvature[i];
    acc += (1.0 + k1[i] * k1[i] + k2 * k2) * geo.ds[i];
  }
  return acc;
}

/// First sampled time at which Q^1 reaches twice its initial value, or t_max
/// if it never does. Samples are taken every snapshot_every steps (every step
/// when that is 0).
inline double q_doubling_probe(const DiscreteCurve& initial, double eps, const FlowConfig& config) {
  FlowConfig c = config;
  c.epsilon = eps;
  const std::size_t cadence = config.snapshot_every > 0 ? static_cast<std::size_t>(config.snapshot_every) : 1;
  std::optional<double> q0;
  std::optional<double> hit;
  run(initial, c, [&](const FlowState& s) {
    if (hit || s.step_index % cadence != 0) return;
    const double q = q_one(geometry(s.curve));
    if (!q0) {
      q0 = q;
    } else if (q >= 2.0 * *q0) {
      hit = s.t;
    }
  });
  return hit.value_or(c.t_max);
}

}  // namespace epsflow::analysis
