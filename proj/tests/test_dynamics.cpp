#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "moes/dynamics.hpp"

using namespace moes;

namespace {

ControlSequence constant_controls(std::size_t steps, std::vector<double> row) {
  auto u = ControlSequence::zeros(steps, static_cast<int>(row.size()));
  for (std::size_t i = 0; i < steps; ++i)
    for (std::size_t a = 0; a < row.size(); ++a) u.at(i, static_cast<int>(a)) = row[a];
  return u;
}

ControlSequence random_controls(const RobotModel& m, std::size_t steps, std::mt19937_64& rng, double spread = 1.5) {
  auto u = ControlSequence::zeros(steps, m.control_dim());
  for (int a = 0; a < u.dim; ++a) {
    std::uniform_real_distribution<double> d(spread * m.lower_bound(a) - 0.2, spread * m.upper_bound(a));
    for (std::size_t i = 0; i < steps; ++i) u.at(i, a) = d(rng);
  }
  return u;
}

}  // namespace

TEST(RobotModel, Defaults) {
  RobotModel m;
  EXPECT_EQ(m.kind, RobotKind::differential_drive);
  EXPECT_EQ(m.state_dim(), 3);
  EXPECT_EQ(m.control_dim(), 2);
  EXPECT_EQ(m.position_dim(), 2);
  EXPECT_DOUBLE_EQ(m.dt, 0.1);
  EXPECT_DOUBLE_EQ(m.lower_bound(0), 0.0);
  EXPECT_DOUBLE_EQ(m.upper_bound(1), m.omega_max);
  EXPECT_EQ(default_start(m), (std::vector<double>{0.5, 0.5, 0.0}));
}

TEST(RobotModel, Validation) {
  RobotModel m;
  m.dt = 0.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = RobotModel{};
  m.workspace = {1.0, 1.0, 1.0};
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = RobotModel{};
  m.v_max = -1.0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = RobotModel{};
  m.kind = RobotKind::single_integrator;
  m.workspace = {1.0, 1.0, 1.0};
  EXPECT_NO_THROW(m.validate());
  EXPECT_THROW(robot_kind_from_string("tank"), std::invalid_argument);
  EXPECT_EQ(robot_kind_from_string(to_string(RobotKind::single_integrator)), RobotKind::single_integrator);
}

TEST(Rollout, ZeroControlsStayAtStart) {
  RobotModel m;
  const std::vector<double> start{0.5, 0.5, 0.0};
  const auto traj = rollout(m, start, ControlSequence::zeros(100, 2));
  ASSERT_EQ(traj.steps, 100u);
  for (std::size_t i = 0; i <= traj.steps; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(traj.state(i)[j], start[j]);
  EXPECT_TRUE(traj.clamp_events.empty());
}

TEST(Rollout, StraightLineHitsWall) {
  RobotModel m;
  const auto traj = rollout(m, std::vector<double>{0.5, 0.5, 0.0}, constant_controls(10, {0.5, 0.0}));
  EXPECT_NEAR(traj.state(10)[0], 1.0, 1e-12);
  EXPECT_NEAR(traj.state(10)[1], 0.5, 1e-12);
  EXPECT_NEAR(traj.state(5)[0], 0.75, 1e-12);
}

TEST(Rollout, ClampIsLogged) {
  RobotModel m;
  const auto traj = rollout(m, std::vector<double>{0.92, 0.5, 0.0}, constant_controls(3, {0.5, 0.0}));
  ASSERT_EQ(traj.clamp_events.size(), 2u);
  EXPECT_EQ(traj.clamp_events[0].step, 2u);
  EXPECT_EQ(traj.clamp_events[0].axis, 0);
  EXPECT_NEAR(traj.clamp_events[0].violation, 0.02, 1e-12);
  EXPECT_EQ(traj.clamp_events[1].step, 3u);
  EXPECT_NEAR(traj.clamp_events[1].violation, 0.05, 1e-12);
  EXPECT_NEAR(traj.clamp_penalty_sum(), 0.02 * 0.02 + 0.05 * 0.05, 1e-14);
  for (std::size_t i = 0; i <= traj.steps; ++i) EXPECT_LE(traj.state(i)[0], 1.0);
}

TEST(Rollout, SingleIntegratorEulerStep) {
  RobotModel m;
  m.kind = RobotKind::single_integrator;
  m.dt = 1.0;
  const auto traj = rollout(m, std::vector<double>{0.5, 0.5}, constant_controls(1, {0.1, -0.1}));
  EXPECT_NEAR(traj.state(1)[0], 0.6, 1e-15);
  EXPECT_NEAR(traj.state(1)[1], 0.4, 1e-15);
}

TEST(Rollout, TurningFollowsHeading) {
  RobotModel m;
  auto u = ControlSequence::zeros(2, 2);
  u.at(0, 1) = 5.0;  // turn to theta = 0.5
  u.at(1, 0) = 1.0;
  const auto traj = rollout(m, std::vector<double>{0.5, 0.5, 0.0}, u);
  EXPECT_NEAR(traj.state(1)[2], 0.5, 1e-15);
  EXPECT_NEAR(traj.state(2)[0], 0.5 + 0.1 * std::cos(0.5), 1e-15);
  EXPECT_NEAR(traj.state(2)[1], 0.5 + 0.1 * std::sin(0.5), 1e-15);
}

TEST(Rollout, RejectsMismatchedShapes) {
  RobotModel m;
  EXPECT_THROW(rollout(m, std::vector<double>{0.5, 0.5}, ControlSequence::zeros(3, 2)), std::invalid_argument);
  EXPECT_THROW(rollout(m, std::vector<double>{0.5, 0.5, 0.0}, ControlSequence::zeros(3, 3)), std::invalid_argument);
}

TEST(Rollout, DeterministicAndInsideWorkspace) {
  RobotModel m;
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto u = project_controls(m, random_controls(m, 100, rng));
    const auto a = rollout(m, std::vector<double>{0.5, 0.5, 0.0}, u);
    const auto b = rollout(m, std::vector<double>{0.5, 0.5, 0.0}, u);
    EXPECT_EQ(a.states, b.states);
    for (std::size_t i = 0; i <= a.steps; ++i)
      for (int j = 0; j < 2; ++j) {
        EXPECT_GE(a.state(i)[j], 0.0);
        EXPECT_LE(a.state(i)[j], 1.0);
      }
    if (a.clamp_events.empty()) {
      for (std::size_t i = 1; i <= a.steps; ++i)
        for (int j = 0; j < 2; ++j) {
          EXPECT_GT(a.state(i)[j], 0.0);
          EXPECT_LT(a.state(i)[j], 1.0);
        }
    }
  }
}

TEST(ProjectControls, Examples) {
  RobotModel m;
  auto u = ControlSequence::zeros(2, 2);
  u.at(0, 0) = -0.2;
  u.at(0, 1) = 0.1;
  u.at(1, 0) = 2 * m.v_max;
  const auto p = project_controls(m, u);
  EXPECT_EQ(p.at(0, 0), 0.0);
  EXPECT_EQ(p.at(0, 1), 0.1);
  EXPECT_EQ(p.at(1, 0), m.v_max);
  EXPECT_EQ(p.at(1, 1), 0.0);
  EXPECT_TRUE(within_bounds(m, p));
  EXPECT_FALSE(within_bounds(m, u));
}

TEST(ProjectControls, Idempotent) {
  std::mt19937_64 rng(9);
  for (auto kind : {RobotKind::differential_drive, RobotKind::single_integrator}) {
    RobotModel m;
    m.kind = kind;
    for (int t = 0; t < 50; ++t) {
      const auto once = project_controls(m, random_controls(m, 30, rng, 2.0));
      EXPECT_EQ(project_controls(m, once), once);
      EXPECT_TRUE(within_bounds(m, once));
    }
  }
}

TEST(ControlSequence, Horizon) {
  const auto u = ControlSequence::zeros(100, 2);
  EXPECT_NEAR(u.horizon(0.1), 10.0, 1e-12);
  EXPECT_EQ(u.row(3).size(), 2u);
}
