#pragma once

// CSV and JSON serialization of diagnostics and analysis results.

#include <fstream>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "epsflow/analysis.hpp"
#include "epsflow/flow.hpp"
#include "epsflow/format.hpp"

namespace epsflow::io {

using json = nlohmann::json;

inline constexpr const char* kDiagnosticsHeader = "t,dt,L,energy,int_k2,q1,q2,q3,q4,max_kappa,turning";

inline void write_diagnostics_row(std::ostream& out, const DiagnosticsRecord& d) {
  out << format_double(d.t) << ',' << format_double(d.dt) << ',' << format_double(d.length) << ','
      << format_double(d.energy) << ',' << format_double(d.int_k2);
  for (double q : d.q) out << ',' << format_double(q);
  out << ',' << format_double(d.max_abs_kappa) << ',' << d.turning_number << '\n';
}

inline void write_diagnostics_csv(std::ostream& out, const std::vector<DiagnosticsRecord>& records) {
  out << kDiagnosticsHeader << '\n';
  for (const auto& d : records) write_diagnostics_row(out, d);
}

inline void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<DiagnosticsRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_diagnostics_csv(out, records);
}

inline json to_json(const DiagnosticsRecord& d) {
  return {{"t", d.t},
          {"dt", d.dt},
          {"L", d.length},
          {"energy", d.energy},
          {"int_k2", d.int_k2},
          {"q1", d.q[0]},
          {"q2", d.q[1]},
          {"q3", d.q[2]},
          {"q4", d.q[3]},
          {"max_kappa", d.max_abs_kappa},
          {"turning", d.turning_number}};
}

inline json to_json(const analysis::RunSummary& r) {
  return {{"epsilon", r.epsilon}, {"status", to_string(r.status)}, {"steps", r.steps}, {"t_final", r.t_final}};
}

inline json to_json(const analysis::ConvergenceStudy& s) {
  json status = json::array();
  for (const auto& r : s.runs) status.push_back(to_json(r));
  return {{"initial", s.initial},
          {"epsilons", s.epsilons},
          {"times", s.times},
          {"d", s.d},
          {"d_kappa", s.d_kappa},
          {"status", status},
          {"reference", to_json(s.reference)},
          {"distance_decreasing", s.distance_decreasing()},
          {"curvature_decreasing", s.curvature_decreasing()}};
}

inline json to_json(const analysis::IdentityResiduals& r) {
  return {{"t_mid", r.t_mid}, {"delta", r.delta}, {"r_kappa", r.r_kappa}, {"r_int_k2", r.r_int_k2}};
}

inline json to_json(const analysis::IdentityAudit& a) {
  return {{"dt", to_json(a.coarse)},
          {"dt_half", to_json(a.fine)},
          {"ratio_kappa", a.ratio_kappa},
          {"ratio_int_k2", a.ratio_int_k2}};
}

inline json to_json(const analysis::BoundAudit& b) {
  return {{"fitted_constants", b.fitted_constants},
          {"borsuk_margin", b.borsuk_margin},
          {"borsuk_relative_margin", b.borsuk_relative_margin}};
}

/// Writes `doc` with a trailing newline; the layout is stable so repeated runs
/// give identical bytes.
inline void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace epsflow::io
