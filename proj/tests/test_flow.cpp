#include "support.hpp"

#include <future>

using namespace epsflow;
using testing_support::expect_well_behaved;

namespace {

constexpr double kPi = std::numbers::pi;

double radius_of(const DiagnosticsRecord& d) { return d.length / (2 * kPi); }

FlowConfig config_for(double eps, Scheme scheme, double t_max) {
  FlowConfig c;
  c.epsilon = eps;
  c.scheme = scheme;
  c.t_max = t_max;
  return c;
}

}  // namespace

TEST(FlowConfig, Validation) {
  FlowConfig c;
  EXPECT_NO_THROW(c.validate());
  auto broken = [](auto&& mutate) {
    FlowConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(broken([](FlowConfig& c) { c.epsilon = -1e-3; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](FlowConfig& c) { c.cfl_second = 0.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](FlowConfig& c) { c.t_max = -1.0; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](FlowConfig& c) { c.n_points = 100; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](FlowConfig& c) { c.reparam_every = -1; }).validate(), std::invalid_argument);
  EXPECT_THROW(broken([](FlowConfig& c) { c.output_times = {0.2, 0.1}; }).validate(), std::invalid_argument);
  EXPECT_EQ(parse_scheme("imex"), Scheme::imex);
  EXPECT_THROW(parse_scheme("euler"), std::invalid_argument);
}

TEST(StableDt, Rules) {
  const auto geo = geometry(make_circle(1.0, 64));
  FlowConfig c;
  c.cfl_second = 0.4;
  const double h = 2 * kPi / 64;
  EXPECT_NEAR(stable_dt(geo, c), 0.4 * h * h, 1e-6);
  EXPECT_NEAR(stable_dt(geo, c), 3.855e-3, 1e-6);
  EXPECT_NEAR(stable_dt(geometry(make_circle(1.0, 128)), c), 0.25 * stable_dt(geo, c), 1e-15);

  c.epsilon = 1e-2;
  c.cfl_second = 0.15;
  c.cfl_fourth = 0.005;
  EXPECT_NEAR(stable_dt(geo, c), 0.005 * std::pow(h, 4) / 1e-2, 1e-15);
  c.scheme = Scheme::imex;
  EXPECT_NEAR(stable_dt(geo, c), 0.15 * h * h, 1e-15);

  // A nonuniform grid leaves part of the fourth-order term explicit under IMEX.
  const auto raw = geometry(make_ellipse(2.0, 1.0, 128));
  const auto uniform = geometry(reparametrize(make_ellipse(2.0, 1.0, 128)));
  EXPECT_LT(stable_dt(raw, c), 0.01 * 0.15 * std::pow(min_spacing(raw), 2));
  EXPECT_NEAR(stable_dt(uniform, c), 0.15 * std::pow(min_spacing(uniform), 2), 1e-15);
}

TEST(Step, ImexStaysStableOnNonuniformGrid) {
  FlowConfig c;
  c.epsilon = 1e-2;
  c.scheme = Scheme::imex;
  c.reparam_every = 0;
  c.t_max = 2e-3;
  const auto traj = run(make_ellipse(2.0, 1.0, 128), c);
  EXPECT_EQ(traj.status, RunStatus::reached_tmax);
  testing_support::expect_well_behaved(traj);
}

TEST(Step, CircleMovesInwardAtUnitSpeed) {
  for (Scheme scheme : {Scheme::explicit_rk4, Scheme::imex}) {
    const auto state = make_state(make_circle(1.0, 64), 0.0);
    const double dt = 1e-3;
    const auto next = step(state, config_for(0.0, scheme, 1.0), dt);
    EXPECT_NEAR(radius_of(next.diagnostics), 1.0 - dt, 2 * dt * dt);
    EXPECT_NEAR(radius_of(next.diagnostics), std::sqrt(1.0 - 2 * dt), 1e-12);
    EXPECT_EQ(next.step_index, 1u);
    EXPECT_DOUBLE_EQ(next.t, dt);
  }
}

TEST(Step, EquilibriumCircleIsStatic) {
  const double eps = 0.04;
  for (Scheme scheme : {Scheme::explicit_rk4, Scheme::imex}) {
    auto state = make_state(make_circle(std::sqrt(eps), 64), eps);
    const auto start = state.curve;
    const auto cfg = config_for(eps, scheme, 1.0);
    for (int k = 0; k < 20; ++k) {
      const auto next = step(state, cfg);
      EXPECT_LT(sup_distance(next.curve, state.curve), 1e-8);
      state = next;
    }
    EXPECT_LT(sup_distance(state.curve, start), 1e-8);
  }
}

TEST(Reparametrize, Properties) {
  const auto circle = make_circle(1.0, 64);
  EXPECT_LT(sup_distance(reparametrize(circle), circle), 1e-12);

  const auto e = make_ellipse(2.0, 1.0, 128);
  const auto r = reparametrize(e);
  const auto geo = geometry(r);
  const double mean = geo.length / 128.0;
  for (double ds : geo.ds) EXPECT_LT(std::abs(ds - mean) / mean, 1e-6);
  EXPECT_NEAR(geo.length, geometry(e).length, 1e-12);
  EXPECT_EQ(r[0], e[0]);
  EXPECT_LT(sup_distance(reparametrize(r), r), 1e-10);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = testing_support::random_blob(rng, 256);
    const auto rc = reparametrize(c);
    EXPECT_NEAR(geometry(rc).length, geometry(c).length, 1e-10);
    EXPECT_EQ(turning_number(rc), 1);
    // Same trace: every new node lies on the old interpolant, so the curvature
    // integral and energy are unchanged.
    EXPECT_NEAR(kappa_norm(rc, 0), kappa_norm(c, 0), 1e-8);
  }
}

TEST(Run, McfCircleMatchesOracle) {
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 0.45);
  double worst = 0.0;
  const auto traj = run(make_circle(1.0, 64), c, [&](const FlowState& s) {
    const double exact = oracle::mcf_radius(1.0, s.t);
    worst = std::max(worst, std::abs(radius_of(s.diagnostics) - exact) / exact);
  });
  EXPECT_EQ(traj.status, RunStatus::reached_tmax);
  EXPECT_DOUBLE_EQ(traj.final_state->t, 0.45);
  EXPECT_LT(worst, 1e-4);
  EXPECT_NEAR(traj.records.back().length, 2 * kPi * std::sqrt(0.1), 1e-3 * 2 * kPi * std::sqrt(0.1));
  expect_well_behaved(traj);
}

TEST(Run, EpsCircleMatchesOracleWithBothSchemes) {
  for (double eps : {1e-3, 1e-2}) {
    std::vector<double> finals;
    for (Scheme scheme : {Scheme::explicit_rk4, Scheme::imex}) {
      FlowConfig c = config_for(eps, scheme, 0.2);
      c.snapshot_every = scheme == Scheme::imex ? 50 : 2000;
      const auto traj = run(make_circle(1.0, 32), c);
      ASSERT_EQ(traj.status, RunStatus::reached_tmax);
      for (const auto& s : traj.snapshots) {
        const double exact = oracle::eps_radius(1.0, eps, s.t);
        EXPECT_NEAR(geometry(s.curve).length / (2 * kPi), exact, 1e-4 * exact);
      }
      finals.push_back(radius_of(traj.records.back()));
      expect_well_behaved(traj);
    }
    EXPECT_NEAR(finals[0], finals[1], 1e-4 * finals[0]);
  }
}

TEST(Run, SchemesAgreeOnEllipse) {
  const auto e = make_ellipse(2.0, 1.0, 64);
  FlowConfig c = config_for(1e-3, Scheme::explicit_rk4, 0.02);
  const auto a = run(e, c);
  c.scheme = Scheme::imex;
  const auto b = run(e, c);
  ASSERT_EQ(a.status, RunStatus::reached_tmax);
  ASSERT_EQ(b.status, RunStatus::reached_tmax);
  EXPECT_LT(sup_distance(reparametrize(a.final_state->curve), reparametrize(b.final_state->curve)), 1e-6);
  expect_well_behaved(a);
  expect_well_behaved(b);
}

TEST(Run, GrowsTowardEquilibrium) {
  FlowConfig c = config_for(0.01, Scheme::imex, 5.0);
  const auto traj = run(make_circle(0.05, 16), c);
  ASSERT_EQ(traj.status, RunStatus::reached_tmax);
  EXPECT_LT(std::abs(radius_of(traj.records.back()) - 0.1), 1e-3);
  for (std::size_t i = 1; i < traj.records.size(); ++i) {
    EXPECT_GE(radius_of(traj.records[i]), radius_of(traj.records[i - 1]) - 1e-12);
  }
  expect_well_behaved(traj);
}

TEST(Run, StopsBeforeExtinction) {
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 1.0);
  c.stop_max_kappa = 100.0;
  const auto traj = run(make_circle(1.0, 64), c);
  EXPECT_EQ(traj.status, RunStatus::singularity_kappa);
  EXPECT_LT(traj.final_state->t, 0.5);
  EXPECT_GT(traj.final_state->t, 0.49);
  expect_well_behaved(traj);

  c.stop_max_kappa = 1e6;
  c.stop_min_length = 0.5;
  const auto by_length = run(make_circle(1.0, 32), c);
  EXPECT_EQ(by_length.status, RunStatus::singularity_length);
  EXPECT_LT(by_length.records.back().length, 0.5);
}

TEST(Run, RejectsCurveAlreadyPastTheStop) {
  FlowConfig c;
  c.stop_min_length = 10.0;
  EXPECT_THROW(run(make_circle(1.0, 32), c), std::invalid_argument);
  FlowConfig n;
  n.n_points = 64;
  EXPECT_THROW(run(make_circle(1.0, 32), n), std::invalid_argument);
}

TEST(Run, LandsExactlyOnOutputTimes) {
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 0.3);
  c.output_times = {0.1, 0.123456789, 0.25};
  const auto traj = run(make_circle(1.0, 32), c);
  ASSERT_EQ(traj.checkpoints.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(traj.checkpoints[i].t, c.output_times[i]);
  EXPECT_EQ(traj.final_state->t, 0.3);
}

TEST(Run, SnapshotsAndRegridSchedule) {
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 0.05);
  c.snapshot_every = 7;
  c.reparam_every = 5;
  const auto traj = run(make_ellipse(2.0, 1.0, 64), c);
  for (const auto& s : traj.snapshots) EXPECT_EQ(s.step % 7, 0u);
  for (std::size_t s : traj.reparam_steps) EXPECT_EQ(s % 5, 0u);
  EXPECT_EQ(traj.records.size(), traj.final_state->step_index + 1);
}

TEST(Run, TimeOrderOfExplicitScheme) {
  // Circle slice: spatially exact, so the radius error is the time error.
  auto error_at = [](double dt) {
    FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 0.25);
    c.fixed_dt = dt;
    const auto traj = run(make_circle(1.0, 32), c);
    return std::abs(radius_of(traj.records.back()) - std::sqrt(0.5));
  };
  const double coarse = error_at(0.25 / 64), fine = error_at(0.25 / 128);
  EXPECT_GE(coarse / fine, 8.0) << coarse << " " << fine;
}

TEST(Run, ConcentricCirclesNeverCross) {
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 0.3);
  c.output_times = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  const auto outer = run(make_circle(1.0, 64), c);
  const auto inner = run(make_circle(0.8, 64), c);
  ASSERT_EQ(outer.checkpoints.size(), inner.checkpoints.size());
  for (std::size_t i = 0; i < outer.checkpoints.size(); ++i) {
    EXPECT_GT(radius_of(outer.checkpoints[i].diagnostics) - radius_of(inner.checkpoints[i].diagnostics), 1e-6);
  }
}

TEST(Run, EllipseInvariants) {
  FlowConfig c = config_for(1e-3, Scheme::imex, 0.1);
  const auto traj = run(make_ellipse(2.0, 1.0, 128), c);
  EXPECT_EQ(traj.status, RunStatus::reached_tmax);
  expect_well_behaved(traj);
  // The ellipse rounds up: the Borsuk gap shrinks.
  const auto gap = [](const DiagnosticsRecord& d) { return d.int_k2 / (4 * kPi * kPi) - 1 / d.length; };
  EXPECT_LT(gap(traj.records.back()), gap(traj.records.front()));
}

TEST(Run, FigureEightKeepsTurningNumberZero) {
  FlowConfig c = config_for(1e-2, Scheme::imex, 0.01);
  const auto traj = run(make_figure_eight(1.0, 128), c);
  expect_well_behaved(traj);
  EXPECT_EQ(traj.records.back().turning_number, 0);
}

TEST(Run, ResolutionLossIsReported) {
  // A step far beyond the stability limit blows up the top octave.
  FlowConfig c = config_for(0.0, Scheme::explicit_rk4, 1.0);
  const auto circle = make_circle(1.0, 32);
  c.fixed_dt = 3.0 * stable_dt(geometry(circle), c);
  c.reparam_every = 0;
  const auto traj = run(testing_support::moved(make_ellipse(1.2, 1.0, 32), 0.0, {0, 0}), c);
  EXPECT_EQ(traj.status, RunStatus::resolution_lost);
}

TEST(Run, DeterministicAndThreadSafe) {
  FlowConfig c = config_for(1e-2, Scheme::imex, 0.02);
  const auto e = make_ellipse(2.0, 1.0, 64);
  const auto ref = run(e, c);
  std::vector<std::future<Trajectory>> jobs;
  for (int k = 0; k < 4; ++k) jobs.push_back(std::async(std::launch::async, [&] { return run(e, c); }));
  for (auto& j : jobs) {
    const auto t = j.get();
    ASSERT_EQ(t.records.size(), ref.records.size());
    EXPECT_EQ(t.final_state->curve, ref.final_state->curve);
  }
}
