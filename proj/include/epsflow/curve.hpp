#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "epsflow/errors.hpp"
#include "epsflow/format.hpp"
#include "epsflow/spectral.hpp"

namespace epsflow {

using ScalarField = std::vector<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
/// Counterclockwise rotation by pi/2.
inline Point rotate_ccw(Point a) { return {-a.y, a.x}; }

/// Samples gamma(x_i), x_i = 2 pi i / N, of a closed immersed plane curve.
/// Construction enforces the grid invariants; instances are immutable.
class DiscreteCurve {
 public:
  static constexpr std::size_t kMinPoints = 16;

  explicit DiscreteCurve(std::vector<Point> points) : points_(std::move(points)) {
    const std::size_t n = points_.size();
    if (n < kMinPoints || !spectral::is_power_of_two(n)) {
      throw std::invalid_argument("DiscreteCurve: N must be a power of two >= 16, got " +
                                  std::to_string(n));
    }
    for (const auto& p : points_) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw std::invalid_argument("DiscreteCurve: non-finite coordinate");
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(norm(points_[(i + 1) % n] - points_[i]) > 0.0)) {
        throw std::invalid_argument("DiscreteCurve: coincident consecutive points at node " +
                                    std::to_string(i));
      }
    }
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }

  std::vector<double> xs() const {
    std::vector<double> out(points_.size());
    std::ranges::transform(points_, out.begin(), [](const Point& p) { return p.x; });
    return out;
  }
  std::vector<double> ys() const {
    std::vector<double> out(points_.size());
    std::ranges::transform(points_, out.begin(), [](const Point& p) { return p.y; });
    return out;
  }

  static DiscreteCurve from_coordinates(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("from_coordinates: size mismatch");
    std::vector<Point> pts(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) pts[i] = {xs[i], ys[i]};
    return DiscreteCurve(std::move(pts));
  }

  /// Grid parameter of node i.
  double parameter(std::size_t i) const {
    return 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(size());
  }

  friend bool operator==(const DiscreteCurve&, const DiscreteCurve&) = default;

 private:
  std::vector<Point> points_;
};

/// Pointwise Frenet data of a DiscreteCurve.
struct CurveGeometry {
  std::vector<Point> tangent;
  std::vector<Point> normal;
  ScalarField curvature;
  ScalarField metric;  // |gamma_x|
  ScalarField ds;      // metric * 2 pi / N
  double length = 0.0;

  std::size_t size() const { return curvature.size(); }
};

/// Relative spectral tail energy above which a curve counts as underresolved.
inline constexpr double kResolutionTailLimit = 1e-3;

inline CurveGeometry geometry(const DiscreteCurve& curve) {
  const std::size_t n = curve.size();
  const auto xs = curve.xs();
  const auto ys = curve.ys();
  auto xhat = fft::forward(xs);
  auto yhat = fft::forward(ys);

  const std::vector<std::vector<fft::Complex>> spectra{xhat, yhat};
  const double tail = spectral::top_octave_fraction(spectra, n);
  if (tail > kResolutionTailLimit) {
    std::ostringstream msg;
    msg << "resolution guard: top-octave spectral energy fraction " << tail << " exceeds "
        << kResolutionTailLimit;
    throw ResolutionError(msg.str());
  }

  spectral::noise_filter(xhat);
  spectral::noise_filter(yhat);
  spectral::differentiate_spectrum(xhat, n, 1);
  spectral::differentiate_spectrum(yhat, n, 1);
  const auto xp = fft::inverse(xhat, n);
  const auto yp = fft::inverse(yhat, n);

  CurveGeometry geo;
  geo.tangent.resize(n);
  geo.normal.resize(n);
  geo.curvature.resize(n);
  geo.metric.resize(n);
  geo.ds.resize(n);
  const double dx = 2.0 * std::numbers::pi / static_cast<double>(n);

  ScalarField tx(n), ty(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = std::sqrt(xp[i] * xp[i] + yp[i] * yp[i]);
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw ResolutionError("degenerate metric |gamma_x| at node " + std::to_string(i));
    }
    geo.metric[i] = g;
    geo.ds[i] = g * dx;
    geo.tangent[i] = {xp[i] / g, yp[i] / g};
    geo.normal[i] = rotate_ccw(geo.tangent[i]);
    tx[i] = geo.tangent[i].x;
    ty[i] = geo.tangent[i].y;
  }

  // kappa = <d_s tau, nu>
  auto filtered_derivative = [n](const ScalarField& f) {
    auto coeffs = fft::forward(f);
    spectral::noise_filter(coeffs);
    spectral::differentiate_spectrum(coeffs, n, 1);
    return fft::inverse(coeffs, n);
  };
  const auto tx_x = filtered_derivative(tx);
  const auto ty_x = filtered_derivative(ty);
  double length = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    geo.curvature[i] = dot({tx_x[i], ty_x[i]}, geo.normal[i]) / geo.metric[i];
    if (!std::isfinite(geo.curvature[i])) throw ResolutionError("non-finite curvature");
    length += geo.ds[i];
  }
  geo.length = length;
  return geo;
}

/// Quadrature of f ds over the curve.
inline double integrate(const CurveGeometry& geo, std::span<const double> field) {
  if (field.size() != geo.size()) {
    throw std::invalid_argument("integrate: field has " + std::to_string(field.size()) +
                                " values, curve has " + std::to_string(geo.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) acc += field[i] * geo.ds[i];
  return acc;
}

inline double integrate(const DiscreteCurve& curve, std::span<const double> field) {
  return integrate(geometry(curve), field);
}

/// Maximum distance from an integer tolerated by turning_number().
inline constexpr double kTurningTolerance = 0.01;

inline int turning_number(const CurveGeometry& geo) {
  const double w = integrate(geo, geo.curvature) / (2.0 * std::numbers::pi);
  const double nearest = std::round(w);
  if (std::abs(w - nearest) > kTurningTolerance) {
    std::ostringstream msg;
    msg << "turning number " << w << " is not an integer";
    throw ResolutionError(msg.str());
  }
  return static_cast<int>(nearest);
}

inline int turning_number(const DiscreteCurve& curve) { return turning_number(geometry(curve)); }

inline double sup_distance(const DiscreteCurve& a, const DiscreteCurve& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sup_distance: curves have different N");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, norm(a[i] - b[i]));
  return d;
}

// Canonical test curves --------------------------------------------------

inline DiscreteCurve make_circle(double radius, std::size_t n) {
  if (!(radius > 0.0)) throw std::invalid_argument("make_circle: radius must be positive");
  if (n < DiscreteCurve::kMinPoints || !spectral::is_power_of_two(n)) {
    throw std::invalid_argument("make_circle: N must be a power of two >= 16");
  }
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {radius * std::cos(x), radius * std::sin(x)};
  }
  return DiscreteCurve(std::move(pts));
}

inline DiscreteCurve make_ellipse(double a, double b, std::size_t n) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("make_ellipse: semi-axes must be positive");
  if (n < DiscreteCurve::kMinPoints || !spectral::is_power_of_two(n)) {
    throw std::invalid_argument("make_ellipse: N must be a power of two >= 16");
  }
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {a * std::cos(x), b * std::sin(x)};
  }
  return DiscreteCurve(std::move(pts));
}

/// Figure-eight (lemniscate of Gerono), turning number zero.
inline DiscreteCurve make_figure_eight(double scale, std::size_t n) {
  if (!(scale > 0.0)) throw std::invalid_argument("make_figure_eight: scale must be positive");
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = {scale * std::sin(x), scale * std::sin(x) * std::cos(x)};
  }
  return DiscreteCurve(std::move(pts));
}

// Snapshot files: "x,y" header, one node per row, closing point not repeated.

inline void write_curve_csv(std::ostream& os, const DiscreteCurve& curve) {
  os << "x,y\n";
  for (const auto& p : curve.points()) os << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

inline void write_curve_csv(const std::string& path, const DiscreteCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curve file '" + path + "'");
  write_curve_csv(out, curve);
}

inline DiscreteCurve read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("curve csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y") throw std::invalid_argument("curve csv: expected header 'x,y', got '" + line + "'");
  std::vector<Point> pts;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("curve csv: row " + std::to_string(row) + " lacks a comma");
    }
    try {
      std::size_t used = 0;
      const std::string xs = line.substr(0, comma);
      const std::string ys = line.substr(comma + 1);
      const double x = std::stod(xs, &used);
      if (used != xs.size()) throw std::invalid_argument("trailing characters");
      const double y = std::stod(ys, &used);
      if (used != ys.size()) throw std::invalid_argument("trailing characters");
      pts.push_back({x, y});
    } catch (const std::exception&) {
      throw std::invalid_argument("curve csv: malformed number on row " + std::to_string(row));
    }
  }
  return DiscreteCurve(std::move(pts));
}

inline DiscreteCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open curve file '" + path + "'");
  return read_curve_csv(in);
}

}  // namespace epsflow
