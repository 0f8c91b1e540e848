#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "epsflow/epsflow.hpp"

namespace testing_support {

using namespace epsflow;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("epsflow_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

/// Rotation by `angle` then translation.
inline DiscreteCurve moved(const DiscreteCurve& c, double angle, Point shift) {
  std::vector<Point> pts;
  const double cs = std::cos(angle), sn = std::sin(angle);
  for (const auto& p : c.points()) pts.push_back({cs * p.x - sn * p.y + shift.x, sn * p.x + cs * p.y + shift.y});
  return DiscreteCurve(std::move(pts));
}

/// Smooth star-shaped curve r(x) = 1 + sum a_k cos(k x + phase_k) with a few
/// low modes, so it stays resolved on any grid of 64 or more nodes.
inline DiscreteCurve random_blob(std::mt19937_64& rng, std::size_t n, double amplitude = 0.05) {
  std::uniform_real_distribution<double> amp(-amplitude, amplitude), phase(0.0, 2.0 * std::numbers::pi);
  double a[4], ph[4];
  for (int k = 0; k < 4; ++k) {
    a[k] = amp(rng);
    ph[k] = phase(rng);
  }
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    double r = 1.0;
    for (int k = 0; k < 4; ++k) r += a[k] * std::cos((k + 2) * x + ph[k]);
    pts[i] = {r * std::cos(x), r * std::sin(x)};
  }
  return DiscreteCurve(std::move(pts));
}

/// Per-trajectory structural checks shared by the flow tests.
inline void expect_well_behaved(const Trajectory& traj, double rel_tol = 1e-9) {
  ASSERT_FALSE(traj.records.empty());
  const int w0 = traj.records.front().turning_number;
  for (std::size_t i = 0; i < traj.records.size(); ++i) {
    const auto& d = traj.records[i];
    EXPECT_EQ(d.turning_number, w0) << "at record " << i;
    const double rhs = d.int_k2 / (4.0 * std::numbers::pi * std::numbers::pi);
    EXPECT_GE(rhs - 1.0 / d.length, -1e-6 * rhs) << "Borsuk at record " << i;
    if (i > 0) {
      const double prev = traj.records[i - 1].energy;
      EXPECT_LE(d.energy - prev, rel_tol * std::abs(prev)) << "energy rose at record " << i;
    }
  }
}

}  // namespace testing_support
