#include "support.hpp"

#include <boost/math/tools/roots.hpp>

using namespace epsflow;
using namespace epsflow::analysis;

namespace {

constexpr double kPi = std::numbers::pi;

FlowConfig imex(double t_max = 1.0) {
  FlowConfig c;
  c.scheme = Scheme::imex;
  c.t_max = t_max;
  return c;
}

}  // namespace

TEST(ConvergenceStudy, RejectsBadArguments) {
  const auto c = make_circle(1.0, 32);
  EXPECT_THROW(convergence_study(c, "c", {}, {0.1}, imex()), std::invalid_argument);
  EXPECT_THROW(convergence_study(c, "c", {1e-3, 1e-2}, {0.1}, imex()), std::invalid_argument);
  EXPECT_THROW(convergence_study(c, "c", {1.0, 1e-2}, {0.1}, imex()), std::invalid_argument);
  EXPECT_THROW(convergence_study(c, "c", {1e-2}, {}, imex()), std::invalid_argument);
  EXPECT_THROW(convergence_study(c, "c", {1e-2}, {0.2, 0.1}, imex()), std::invalid_argument);
}

TEST(ConvergenceStudy, CircleGapsMatchOracle) {
  const std::vector<double> eps{1e-2, 1e-3, 1e-4};
  const std::vector<double> times{0.1, 0.25};
  const auto s = convergence_study(make_circle(1.0, 64), "circle", eps, times, imex());
  ASSERT_EQ(s.d.size(), 3u);
  EXPECT_TRUE(s.distance_decreasing());
  EXPECT_TRUE(s.curvature_decreasing());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    EXPECT_EQ(s.runs[e].status, RunStatus::reached_tmax);
    for (std::size_t t = 0; t < times.size(); ++t) {
      const double r_eps = oracle::eps_radius(1.0, eps[e], times[t]);
      const double r_0 = oracle::mcf_radius(1.0, times[t]);
      EXPECT_NEAR(s.d[e][t], std::abs(r_eps - r_0), 1e-8);
      EXPECT_NEAR(s.d_kappa[e][t], std::abs(1 / r_eps - 1 / r_0), 1e-7);
    }
  }
  EXPECT_LT(s.d[2][1], 5e-3);
  EXPECT_LT(s.d[1][1] / s.d[0][1], 0.5);
}

TEST(ConvergenceStudy, EllipseCurvatureGapShrinks) {
  const auto s = convergence_study(make_ellipse(2.0, 1.0, 64), "ellipse", {1e-2, 1e-3, 1e-4}, {0.05}, imex());
  EXPECT_TRUE(s.distance_decreasing());
  EXPECT_TRUE(s.curvature_decreasing());
  for (const auto& row : s.d) EXPECT_TRUE(std::isfinite(row[0]) && row[0] >= 0.0);
}

TEST(ConvergenceStudy, ReferenceSingularityIsAnError) {
  EXPECT_THROW(convergence_study(make_circle(1.0, 32), "circle", {1e-2}, {0.6}, imex()), SingularityError);
}

TEST(ConvergenceStudy, ColumnOrdering) {
  EXPECT_TRUE(ConvergenceStudy::strictly_decreasing({{3, 2}, {2, 1}, {1, 0.5}}));
  EXPECT_FALSE(ConvergenceStudy::strictly_decreasing({{3, 2}, {2, 2}}));
  EXPECT_FALSE(ConvergenceStudy::strictly_decreasing({{3, 2}, {2, std::nan("")}}));
}

TEST(IdentityAudit, CircleIntKappaSquared) {
  FlowConfig c;
  c.fixed_dt = 1e-4;
  c.snapshot_every = 1;
  c.reparam_every = 0;
  c.t_max = 0.3;
  const auto traj = run(make_circle(1.0, 256), c);
  const auto r = identity_residuals(traj, 0.0, 0.2);
  EXPECT_NEAR(r.t_mid, 0.2, 1e-9);
  EXPECT_LT(r.r_int_k2, 1e-5);

  const auto audit = identity_audit(make_circle(1.0, 256), c);
  EXPECT_LT(audit.coarse.r_int_k2, 1e-5);
  EXPECT_GE(audit.ratio_int_k2, 3.5);
  EXPECT_LE(audit.ratio_int_k2, 4.5);
  EXPECT_GE(audit.ratio_kappa, 3.5);
  EXPECT_LE(audit.ratio_kappa, 4.5);
}

TEST(IdentityAudit, EllipseRatios) {
  for (double eps : {0.0, 1e-3, 1e-2}) {
    FlowConfig c = imex(1.0);
    c.epsilon = eps;
    c.reparam_every = 0;
    c.fixed_dt = 5e-5;
    c.snapshot_every = 10;
    const auto audit = identity_audit(reparametrize(make_ellipse(2.0, 1.0, 128)), c, 0.02);
    EXPECT_NEAR(audit.fine.t_mid, 0.02, 1e-12);
    EXPECT_GE(audit.ratio_kappa, 3.5) << eps;
    EXPECT_LE(audit.ratio_kappa, 4.5) << eps;
    EXPECT_GE(audit.ratio_int_k2, 3.5) << eps;
    EXPECT_LE(audit.ratio_int_k2, 4.5) << eps;
  }
}

TEST(IdentityAudit, StaticCircle) {
  const double eps = 0.01;
  FlowConfig c = imex(0.1);
  c.epsilon = eps;
  c.reparam_every = 0;
  c.fixed_dt = 1e-3;
  c.snapshot_every = 10;
  const auto r = identity_residuals(run(make_circle(std::sqrt(eps), 128), c), eps);
  EXPECT_LT(r.r_kappa, 1e-9);
  EXPECT_LT(r.r_int_k2, 1e-9);
}

TEST(IdentityAudit, RejectsContaminatedWindows) {
  FlowConfig c;
  c.snapshot_every = 10;
  c.reparam_every = 5;
  c.t_max = 0.05;
  EXPECT_THROW(identity_residuals(run(make_circle(1.0, 32), c), 0.0), AuditError);
  c.reparam_every = 0;
  c.snapshot_every = 1000;
  EXPECT_THROW(identity_residuals(run(make_circle(1.0, 32), c), 0.0), AuditError);
  EXPECT_THROW(identity_audit(make_circle(1.0, 32), FlowConfig{}), std::invalid_argument);
}

TEST(Monotonicity, Runs) {
  FlowConfig c;
  c.t_max = 0.4;
  const auto mcf = run(make_circle(1.0, 256), c);
  EXPECT_LE(monotonicity_audit(mcf), 1e-9 * 2 * kPi);

  FlowConfig e = imex(0.05);
  e.epsilon = 1e-3;
  const auto ell = run(make_ellipse(2.0, 1.0, 256), e);
  EXPECT_LE(monotonicity_audit(ell), 1e-9 * ell.records.front().energy);

  FlowConfig q = imex(0.5);
  q.epsilon = 0.01;
  const auto eq = run(make_circle(0.1, 64), q);
  for (const auto& d : eq.records) EXPECT_NEAR(d.energy, eq.records.front().energy, 1e-10);
}

TEST(BoundAudit, BorsukMarginsAndConstants) {
  FlowConfig c;
  c.t_max = 0.3;
  const auto circle = bound_audit(run(make_circle(1.0, 128), c));
  EXPECT_NEAR(circle.borsuk_margin, 0.0, 1e-8);
  for (double v : circle.fitted_constants) EXPECT_TRUE(std::isfinite(v));

  FlowConfig e = imex(0.1);
  e.epsilon = 1e-2;
  const auto ellipse = bound_audit(run(make_ellipse(2.0, 1.0, 128), e));
  EXPECT_GT(ellipse.borsuk_margin, 0.0);
  for (double v : ellipse.fitted_constants) EXPECT_TRUE(std::isfinite(v));

  Trajectory single;
  single.records.push_back(make_diagnostics(geometry(make_circle(1.0, 32)), 0.0, 0.0, 0.0));
  EXPECT_THROW(bound_audit(single), AuditError);
  EXPECT_THROW(bound_audit(Trajectory{}), AuditError);
}

TEST(QDoubling, CircleMatchesRootFind) {
  // Q1 = 2 pi (R + R^-3) doubles from 4 pi when R + R^-3 = 4.
  auto f = [](double r) { return r + 1 / (r * r * r) - 4.0; };
  std::uintmax_t iters = 100;
  const auto [lo, hi] =
      boost::math::tools::toms748_solve(f, 0.3, 0.99, boost::math::tools::eps_tolerance<double>(50), iters);
  const double r_star = 0.5 * (lo + hi);
  const double t_star = 0.5 * (1 - r_star * r_star);

  FlowConfig c;
  c.t_max = 0.45;
  const double probe = q_doubling_probe(make_circle(1.0, 256), 0.0, c);
  EXPECT_NEAR(probe, t_star, 1e-3);
}

TEST(QDoubling, EquilibriumNeverDoubles) {
  FlowConfig c = imex(0.3);
  EXPECT_EQ(q_doubling_probe(make_circle(0.1, 64), 0.01, c), 0.3);
}

TEST(QDoubling, SmallerCirclesDoubleSooner) {
  FlowConfig c = imex(0.45);
  const double big = q_doubling_probe(make_circle(1.0, 64), 1e-3, c);
  const double small = q_doubling_probe(make_circle(0.8, 64), 1e-3, c);
  EXPECT_LT(small, big);
  EXPECT_LT(big, 0.45);
}

TEST(QDoubling, CadenceInvariance) {
  FlowConfig c;
  c.t_max = 0.4;
  c.fixed_dt = 1e-3;
  c.snapshot_every = 1;
  const double fine = q_doubling_probe(make_circle(1.0, 32), 0.0, c);
  c.snapshot_every = 2;
  const double coarse = q_doubling_probe(make_circle(1.0, 32), 0.0, c);
  EXPECT_LE(std::abs(fine - coarse), 2 * c.fixed_dt);
}

TEST(GradientOrder, SymmetricCasesSitAtTheFloor) {
  const auto circle = gradient_order(make_circle(1.0, 64), 0.1, 2, 1e-3);
  EXPECT_TRUE(circle.at_floor);
  EXPECT_TRUE(circle.passed);
  const auto ellipse = gradient_order(make_ellipse(2.0, 1.0, 128), 0.1, 2, 1e-3);
  EXPECT_FALSE(ellipse.at_floor);
  EXPECT_TRUE(ellipse.passed);
}
