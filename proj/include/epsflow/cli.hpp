#pragma once

// Batch front-end: JSON experiment configs in, CSV/JSON artifacts out.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "epsflow/analysis.hpp"
#include "epsflow/curve.hpp"
#include "epsflow/energy.hpp"
#include "epsflow/errors.hpp"
#include "epsflow/flow.hpp"
#include "epsflow/io.hpp"
#include "epsflow/oracle.hpp"

namespace epsflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kSingularity = 2, kAuditFailure = 3 };

struct InitialCurveSpec {
  std::string kind = "circle";  // circle | ellipse | file
  double radius = 1.0;
  double a = 2.0;
  double b = 1.0;
  fs::path path;
};

struct ExperimentConfig {
  std::string command;
  InitialCurveSpec initial;
  std::size_t n_points = 256;  // ignored for kind = file
  FlowConfig flow;
  std::vector<double> epsilon_list;
  std::vector<double> sample_times;
  fs::path output_dir = "out";
  std::uint64_t seed = 0;  // reserved
  bool quiet = false;
};

inline const std::set<std::string>& known_commands() {
  static const std::set<std::string> names{"simulate", "sweep", "verify", "study"};
  return names;
}

namespace detail {

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("config: field '") + key + "' has the wrong type");
  }
}

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument("config: unknown field '" + key + "' in " + where);
  }
}

}  // namespace detail

/// Builds a config from a parsed document. Relative file paths are resolved
/// against `base_dir` (the directory holding the config file).
inline ExperimentConfig parse_config(const json& doc, const std::string& command, const fs::path& base_dir = {}) {
  if (!known_commands().contains(command)) throw std::invalid_argument("unknown command '" + command + "'");
  if (!doc.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
  detail::reject_unknown(doc,
                         {"command", "initial", "n_points", "epsilon", "scheme", "cfl_second", "cfl_fourth",
                          "reparam_every", "t_max", "stop_max_kappa", "stop_min_length", "snapshot_every",
                          "fixed_dt", "epsilon_list", "sample_times", "output_dir", "seed"},
                         "config");
  ExperimentConfig c;
  c.command = command;
  if (doc.contains("command") && detail::get<std::string>(doc, "command", "") != command) {
    throw std::invalid_argument("config: 'command' field disagrees with the command line");
  }

  const json init = doc.value("initial", json::object());
  if (!init.is_object()) throw std::invalid_argument("config: 'initial' must be an object");
  detail::reject_unknown(init, {"kind", "radius", "a", "b", "path"}, "initial");
  c.initial.kind = detail::get<std::string>(init, "kind", "circle");
  c.initial.radius = detail::get<double>(init, "radius", 1.0);
  c.initial.a = detail::get<double>(init, "a", 2.0);
  c.initial.b = detail::get<double>(init, "b", 1.0);
  if (c.initial.kind == "file") {
    if (!init.contains("path")) throw std::invalid_argument("config: initial kind 'file' needs a path");
    c.initial.path = detail::get<std::string>(init, "path", "");
    if (c.initial.path.is_relative()) c.initial.path = base_dir / c.initial.path;
    if (!fs::exists(c.initial.path)) {
      throw std::invalid_argument("config: initial curve file " + c.initial.path.string() + " does not exist");
    }
  } else if (c.initial.kind == "circle") {
    if (!(c.initial.radius > 0.0)) throw std::invalid_argument("config: circle radius must be positive");
  } else if (c.initial.kind == "ellipse") {
    if (!(c.initial.a > 0.0 && c.initial.b > 0.0)) {
      throw std::invalid_argument("config: ellipse semi-axes must be positive");
    }
  } else {
    throw std::invalid_argument("config: unknown initial kind '" + c.initial.kind + "'");
  }

  c.n_points = detail::get<std::size_t>(doc, "n_points", c.n_points);
  auto& f = c.flow;
  f.epsilon = detail::get<double>(doc, "epsilon", f.epsilon);
  f.scheme = parse_scheme(detail::get<std::string>(doc, "scheme", std::string(to_string(f.scheme))));
  f.cfl_second = detail::get<double>(doc, "cfl_second", f.cfl_second);
  f.cfl_fourth = detail::get<double>(doc, "cfl_fourth", f.cfl_fourth);
  f.reparam_every = detail::get<int>(doc, "reparam_every", f.reparam_every);
  f.t_max = detail::get<double>(doc, "t_max", f.t_max);
  f.stop_max_kappa = detail::get<double>(doc, "stop_max_kappa", f.stop_max_kappa);
  f.stop_min_length = detail::get<double>(doc, "stop_min_length", f.stop_min_length);
  f.snapshot_every = detail::get<int>(doc, "snapshot_every", f.snapshot_every);
  f.fixed_dt = detail::get<double>(doc, "fixed_dt", f.fixed_dt);
  if (c.initial.kind != "file") f.n_points = c.n_points;
  f.validate();

  c.epsilon_list = detail::get<std::vector<double>>(doc, "epsilon_list", {});
  c.sample_times = detail::get<std::vector<double>>(doc, "sample_times", {});
  c.output_dir = detail::get<std::string>(doc, "output_dir", c.output_dir.string());
  c.seed = detail::get<std::uint64_t>(doc, "seed", 0);

  if (command == "sweep" || command == "study") {
    if (c.epsilon_list.empty()) throw std::invalid_argument("config: epsilon_list must not be empty");
    for (std::size_t i = 0; i < c.epsilon_list.size(); ++i) {
      const double e = c.epsilon_list[i];
      if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("config: epsilon_list entries must be >= 0");
      if (i > 0 && !(e < c.epsilon_list[i - 1])) {
        throw std::invalid_argument("config: epsilon_list must be strictly decreasing");
      }
    }
  }
  if (command == "study") {
    for (double e : c.epsilon_list) {
      if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("config: study epsilons must lie in (0, 1)");
    }
    if (c.sample_times.empty()) throw std::invalid_argument("config: sample_times must not be empty");
    for (std::size_t i = 0; i < c.sample_times.size(); ++i) {
      if (!(c.sample_times[i] > 0.0) || (i > 0 && !(c.sample_times[i] > c.sample_times[i - 1]))) {
        throw std::invalid_argument("config: sample_times must be positive and increasing");
      }
    }
  }
  return c;
}

inline ExperimentConfig load_config(const fs::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, command, path.parent_path());
}

inline DiscreteCurve build_initial(const ExperimentConfig& c) {
  if (c.initial.kind == "file") return read_curve_csv(c.initial.path.string());
  if (c.initial.kind == "ellipse") return make_ellipse(c.initial.a, c.initial.b, c.n_points);
  return make_circle(c.initial.radius, c.n_points);
}

inline std::string describe_initial(const ExperimentConfig& c, std::size_t n) {
  if (c.initial.kind == "file") return "file(" + c.initial.path.filename().string() + ")";
  const std::string size = std::to_string(n);
  if (c.initial.kind == "ellipse") {
    return "ellipse(" + format_double(c.initial.a) + "," + format_double(c.initial.b) + "," + size + ")";
  }
  return "circle(" + format_double(c.initial.radius) + "," + size + ")";
}

inline void prepare_output(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::invalid_argument("cannot create output directory " + dir.string());
}

inline int exit_code_for(RunStatus s) {
  switch (s) {
    case RunStatus::reached_tmax:
      return kSuccess;
    case RunStatus::singularity_kappa:
    case RunStatus::singularity_length:
      return kSingularity;
    case RunStatus::resolution_lost:
      break;
  }
  return kConfigError;
}

// Commands ------------------------------------------------------------------

/// One flow from `initial` into `dir`.
inline int simulate_into(const DiscreteCurve& initial, const FlowConfig& flow, const fs::path& dir, std::ostream& log,
                         std::ostream& err, bool quiet) {
  prepare_output(dir);
  const Trajectory traj = run(initial, flow);
  io::write_diagnostics_csv(dir / "diagnostics.csv", traj.records);
  std::vector<std::size_t> written;
  for (const auto& s : traj.snapshots) {
    write_curve_csv((dir / ("snap_" + std::to_string(s.step) + ".csv")).string(), s.curve);
    written.push_back(s.step);
  }
  const FlowState& last = *traj.final_state;
  if (std::ranges::find(written, last.step_index) == written.end()) {
    write_curve_csv((dir / ("snap_" + std::to_string(last.step_index) + ".csv")).string(), last.curve);
  }
  json result = {{"status", to_string(traj.status)},
                 {"epsilon", flow.epsilon},
                 {"scheme", to_string(flow.scheme)},
                 {"n_points", initial.size()},
                 {"steps", last.step_index},
                 {"t_final", last.t},
                 {"reparametrizations", traj.reparam_steps.size()},
                 {"final", io::to_json(last.diagnostics)}};
  io::write_json(dir / "result.json", result);
  if (!quiet) {
    log << "status " << to_string(traj.status) << " at t = " << format_double(last.t) << " after " << last.step_index
        << " steps, L = " << format_double(last.diagnostics.length) << '\n';
  }
  if (traj.status == RunStatus::resolution_lost) {
    err << "error: the grid lost resolution at t = " << format_double(last.t) << '\n';
  }
  return exit_code_for(traj.status);
}

inline int simulate(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  return simulate_into(build_initial(c), c.flow, c.output_dir, log, err, c.quiet);
}

/// simulate for every entry of epsilon_list, into eps_<index>/ subdirectories.
/// Returns the worst exit code.
inline int sweep(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  const auto initial = build_initial(c);
  int worst = kSuccess;
  for (std::size_t i = 0; i < c.epsilon_list.size(); ++i) {
    FlowConfig f = c.flow;
    f.epsilon = c.epsilon_list[i];
    if (!c.quiet) log << "epsilon = " << format_double(f.epsilon) << ": ";
    const int code = simulate_into(initial, f, c.output_dir / ("eps_" + std::to_string(i)), log, err, c.quiet);
    if (code == kConfigError || (code == kSingularity && worst == kSuccess)) worst = code;
  }
  return worst;
}

struct Check {
  std::string name;
  bool passed = false;
  json detail;
};

inline constexpr double kBorsukTolerance = 1e-6;
inline constexpr double kMonotoneTolerance = 1e-9;
inline constexpr double kConsistencyTolerance = 1e-7;
inline constexpr double kIdentityFloor = 1e-9;
inline constexpr int kShortFlowSteps = 200;

/// The audit battery behind `verify`. Checks run in order; a curve that fails
/// the resolution guard is not examined further.
inline std::vector<Check> audit_battery(const DiscreteCurve& initial, const FlowConfig& flow) {
  std::vector<Check> checks;
  const double eps = flow.epsilon;

  std::optional<CurveGeometry> geo;
  try {
    geo = geometry(initial);
    checks.push_back({"resolution_guard", true, {{"n_points", initial.size()}}});
  } catch (const ResolutionError& e) {
    checks.push_back({"resolution_guard", false, {{"message", e.what()}}});
    return checks;
  }

  try {
    const int w = turning_number(*geo);
    checks.push_back({"turning_number", true, {{"value", w}}});
  } catch (const ResolutionError& e) {
    checks.push_back({"turning_number", false, {{"message", e.what()}}});
    return checks;
  }

  {
    const auto r = energy_report(*geo, eps, kMaxNormOrder);
    const double rel = (r.borsuk_rhs - r.borsuk_lhs) / r.borsuk_rhs;
    checks.push_back({"borsuk_initial", rel >= -kBorsukTolerance, {{"relative_margin", rel}}});
  }

  {
    json cases = json::array();
    bool ok = true;
    for (int m : {0, 1, 2}) {
      const auto g = analysis::gradient_order(initial, eps, m, 1e-3);
      ok = ok && g.passed;
      cases.push_back({{"mode", m},
                       {"discrepancy_h", g.coarse.discrepancy},
                       {"discrepancy_h2", g.fine.discrepancy},
                       {"ratio", g.at_floor ? json(nullptr) : json(g.ratio)},
                       {"at_floor", g.at_floor},
                       {"passed", g.passed}});
    }
    checks.push_back({"gradient_check", ok, {{"cases", cases}}});
  }

  {
    const auto a = dt_kappa_rhs(*geo, eps);
    const auto b = dt_kappa_rhs_compositional(*geo, eps);
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
    checks.push_back({"kappa_rhs_consistency", gap <= kConsistencyTolerance, {{"max_difference", gap}}});
  }

  FlowConfig short_flow = flow;
  short_flow.output_times.clear();
  short_flow.snapshot_every = 0;
  short_flow.t_max = std::min(flow.t_max, kShortFlowSteps * stable_dt(*geo, flow));
  const Trajectory traj = run(initial, short_flow);
  checks.push_back({"short_flow",
                    traj.status == RunStatus::reached_tmax,
                    {{"status", to_string(traj.status)}, {"t_final", traj.final_state->t}}});

  {
    const double increase = analysis::monotonicity_audit(traj);
    const double scale = std::abs(traj.records.front().energy);
    checks.push_back({"energy_monotonicity",
                      increase <= kMonotoneTolerance * scale,
                      {{"max_increase", increase}, {"energy", scale}}});
  }

  {
    const int w0 = traj.records.front().turning_number;
    const bool same = std::ranges::all_of(traj.records, [w0](const auto& d) { return d.turning_number == w0; });
    checks.push_back({"turning_number_conservation", same, {{"initial", w0}}});
  }

  if (traj.records.size() >= 2) {
    const auto b = analysis::bound_audit(traj);
    const bool finite = std::ranges::all_of(b.fitted_constants, [](double v) { return std::isfinite(v); });
    checks.push_back({"borsuk_along_flow", b.borsuk_relative_margin >= -kBorsukTolerance, io::to_json(b)});
    checks.push_back({"bound_constants_finite", eps >= 1.0 || finite, io::to_json(b)});
  }

  {
    // Start from a uniform grid and keep it: regrid events would break the
    // difference windows.
    const auto start = regrid(initial);
    const auto g = geometry(start);
    FlowConfig audit = flow;
    audit.reparam_every = 0;
    audit.output_times.clear();
    // The window has to be short against the fastest resolved decay rate, or
    // the stiff modes swamp the dt^2 term. Modes beyond N/8 sit near the
    // filter floor and are left out.
    const double wavenumber = static_cast<double>(g.size()) / 8.0 / (g.length / (2.0 * std::numbers::pi));
    const double rate = 2.0 * flow.epsilon * std::pow(wavenumber, 4) + wavenumber * wavenumber;
    const double width = 0.05 / rate;
    const double cadence = std::clamp(std::ceil(width / (0.5 * stable_dt(g, flow))), 1.0, 1000.0);
    audit.fixed_dt = width / cadence;
    audit.snapshot_every = static_cast<int>(cadence);
    try {
      // Centred past the transient from the initial regrid.
      const auto r = analysis::identity_audit(start, audit, 20.0 * audit.fixed_dt * cadence);
      // Differences over a short window carry roundoff of order eps * scale / delta;
      // below ten times that the refinement ratio means nothing.
      const double kappa_scale = std::ranges::max(g.curvature, {}, [](double k) { return std::abs(k); });
      auto at_floor = [](double residual, double scale, double delta) {
        return residual < std::max(kIdentityFloor, 640.0 * std::numeric_limits<double>::epsilon() * std::abs(scale) / delta);
      };
      const bool int_ok = at_floor(r.fine.r_int_k2, kappa_norm(g, 0), r.fine.delta) ||
                          (r.ratio_int_k2 >= 3.5 && r.ratio_int_k2 <= 4.5);
      // The nodewise residual only has to shrink: its max over nodes mixes in
      // the step error.
      const bool kappa_ok = at_floor(r.fine.r_kappa, kappa_scale, r.fine.delta) || r.fine.r_kappa < r.coarse.r_kappa;
      const bool ok = int_ok && kappa_ok;
      checks.push_back({"identity_audit", ok, io::to_json(r)});
    } catch (const Error& e) {
      checks.push_back({"identity_audit", false, {{"message", e.what()}}});
    }
  }
  return checks;
}

inline int verify(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  prepare_output(c.output_dir);
  const auto initial = build_initial(c);
  const auto checks = audit_battery(initial, c.flow);
  json doc = {{"initial", describe_initial(c, initial.size())}, {"epsilon", c.flow.epsilon}};
  json list = json::array();
  std::vector<std::string> failed;
  for (const auto& ch : checks) {
    list.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    if (!ch.passed) failed.push_back(ch.name);
  }
  doc["checks"] = list;
  doc["passed"] = failed.empty();
  io::write_json(c.output_dir / "audit.json", doc);
  for (const auto& name : failed) err << "audit failed: " << name << '\n';
  if (!c.quiet) log << checks.size() - failed.size() << "/" << checks.size() << " checks passed\n";
  return failed.empty() ? kSuccess : kAuditFailure;
}

inline int study(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  prepare_output(c.output_dir);
  const auto initial = build_initial(c);
  analysis::ConvergenceStudy s;
  try {
    s = analysis::convergence_study(initial, describe_initial(c, initial.size()), c.epsilon_list, c.sample_times,
                                    c.flow);
  } catch (const SingularityError& e) {
    err << "error: " << e.what() << '\n';
    return kSingularity;
  }
  io::write_json(c.output_dir / "study.json", io::to_json(s));
  const bool ok = s.distance_decreasing();
  if (!c.quiet) {
    log << "distance columns " << (ok ? "" : "not ") << "strictly decreasing in epsilon; curvature columns "
        << (s.curvature_decreasing() ? "" : "not ") << "strictly decreasing\n";
  }
  if (!ok) err << "study: a distance column is not strictly decreasing in epsilon\n";
  return ok ? kSuccess : kAuditFailure;
}

inline int dispatch(const ExperimentConfig& c, std::ostream& log, std::ostream& err) {
  if (c.command == "simulate") return simulate(c, log, err);
  if (c.command == "sweep") return sweep(c, log, err);
  if (c.command == "verify") return verify(c, log, err);
  return study(c, log, err);
}

/// Full command-line entry point.
inline int main(int argc, char** argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Elastic-regularized curve shortening experiments"};
  app.name("epsflow");
  std::string command;
  std::string config_path;
  std::string out_dir;
  bool quiet = false;
  app.add_option("command", command, "simulate | sweep | verify | study")
      ->required()
      ->check(CLI::IsMember(known_commands()));
  app.add_option("config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return kConfigError;
  }

  try {
    ExperimentConfig c = load_config(config_path, command);
    if (!out_dir.empty()) c.output_dir = out_dir;
    c.quiet = quiet;
    return dispatch(c, log, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace epsflow::cli
