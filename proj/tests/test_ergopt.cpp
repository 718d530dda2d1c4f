#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "moes/ergopt.hpp"
#include "moes/maps.hpp"

using namespace moes;

namespace {

ErgodicProblem default_problem(int k_max = 10, std::size_t steps = 100) {
  RobotModel model;
  return ErgodicProblem{SpectralBasis(2, {1.0, 1.0}, k_max), model, {0.5, 0.5, 0.0}, steps};
}

CoeffTable mixture_target(const GaussianMixture& mix, const SpectralBasis& basis) {
  return map_coefficients(rasterize_mixture(mix, {1.0, 1.0}, {64, 64}), basis);
}

GaussianMixture random_bimodal(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.15, 0.85), sig(0.08, 0.15);
  return {{{pos(rng), pos(rng)}, sig(rng), 1.0}, {{pos(rng), pos(rng)}, sig(rng), 1.0}};
}

ControlSequence random_inner_controls(const RobotModel& m, std::size_t steps, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> v(0.05, 0.6), w(-3.0, 3.0);
  auto u = ControlSequence::zeros(steps, 2);
  for (std::size_t i = 0; i < steps; ++i) {
    u.at(i, 0) = std::min(v(rng), m.v_max);
    u.at(i, 1) = w(rng);
  }
  return u;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> central_differences(const ControlSequence& u, const CoeffTable& target,
                                        const ErgodicProblem& p, double h) {
  std::vector<double> fd(u.values.size());
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    auto up = u, um = u;
    up.values[i] += h;
    um.values[i] -= h;
    fd[i] = (scalarized_objective(up, target, p).total() - scalarized_objective(um, target, p).total()) / (2 * h);
  }
  return fd;
}

}  // namespace

TEST(ErgodicProblem, Validation) {
  auto p = default_problem();
  EXPECT_NO_THROW(p.validate());
  p.start = {0.5, 0.5};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = default_problem();
  p.start = {1.5, 0.5, 0.0};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = default_problem();
  p.horizon_steps = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = default_problem();
  p.model.workspace = {2.0, 1.0};
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ErgOptConfig, Validation) {
  ErgOptConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ErgOptConfig{};
  c.shrink = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ErgOptConfig{};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(descent_method_from_string("newton"), std::invalid_argument);
}

TEST(ScalarizedObjective, StationaryCenterVsUniform) {
  const auto p = default_problem(4);
  const auto phi = map_coefficients(uniform_density({1.0, 1.0}, {32, 32}), p.basis);
  const auto u = p.zero_controls();
  const auto traj = rollout(p.model, p.start, u);
  const double expect = ergodic_metric(trajectory_coefficients(traj.positions(1, traj.steps), p.basis), phi, p.basis);
  const auto v = scalarized_objective(u, phi, p);
  EXPECT_EQ(v.ergodic, expect);
  EXPECT_EQ(v.penalty, 0.0);
}

TEST(ScalarizedObjective, OwnCoefficientsGiveZero) {
  const auto p = default_problem(6);
  std::mt19937_64 rng(2);
  const auto u = random_inner_controls(p.model, p.horizon_steps, rng);
  const auto traj = rollout(p.model, p.start, u);
  const auto c = trajectory_coefficients(traj.positions(1, traj.steps), p.basis);
  EXPECT_NEAR(scalarized_objective(u, c.coeffs, p).ergodic, 0.0, 1e-28);
}

TEST(ScalarizedObjective, MatchesIndependentRecomputation) {
  const auto p = default_problem();
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto phi = mixture_target(random_bimodal(rng), p.basis);
    auto u = random_inner_controls(p.model, p.horizon_steps, rng);
    for (std::size_t i = 0; i < 15; ++i) u.at(i, 0) = p.model.v_max;  // run into walls
    const auto traj = rollout(p.model, p.start, u);
    const double erg = ergodic_metric(trajectory_coefficients(traj.positions(1, traj.steps), p.basis), phi, p.basis);
    const auto v = scalarized_objective(u, phi, p, 100.0);
    EXPECT_NEAR(v.ergodic, erg, 1e-12);
    EXPECT_NEAR(v.penalty, 100.0 * traj.clamp_penalty_sum(), 1e-12);
  }
}

TEST(ObjectiveGradient, SymmetricCenterHasZeroSpeedGradient) {
  const auto p = default_problem(1);
  const auto phi = map_coefficients(uniform_density({1.0, 1.0}, {8, 8}), p.basis);
  const auto g = objective_gradient(p.zero_controls(), phi, p);
  for (std::size_t i = 0; i < p.horizon_steps; ++i) EXPECT_NEAR(g[i * 2], 0.0, 1e-12);
}

TEST(ObjectiveGradient, ZeroResidualGivesZeroGradient) {
  const auto p = default_problem(8);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> w(-1.0, 1.0);
  auto u = ControlSequence::zeros(p.horizon_steps, 2);
  for (std::size_t i = 0; i < u.steps; ++i) {
    u.at(i, 0) = 0.04;
    u.at(i, 1) = w(rng);
  }
  const auto traj = rollout(p.model, p.start, u);
  ASSERT_TRUE(traj.clamp_events.empty());
  const auto c = trajectory_coefficients(traj.positions(1, traj.steps), p.basis);
  EXPECT_LT(norm(objective_gradient(u, c.coeffs, p)), 1e-12);
}

TEST(ObjectiveGradient, MatchesFiniteDifferences) {
  const auto p = default_problem(10, 40);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 8; ++t) {
    const auto phi = mixture_target(random_bimodal(rng), p.basis);
    const auto u = random_inner_controls(p.model, p.horizon_steps, rng);
    const auto g = objective_gradient(u, phi, p);
    const auto fd = central_differences(u, phi, p, 1e-6);
    std::vector<double> diff(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - fd[i];
    EXPECT_LT(norm(diff) / norm(fd), 1e-4) << "instance " << t;
  }
}

TEST(ObjectiveGradient, MatchesFiniteDifferencesWithWallPenalty) {
  const auto p = default_problem(6, 30);
  std::mt19937_64 rng(10);
  const auto phi = mixture_target(random_bimodal(rng), p.basis);
  auto u = ControlSequence::zeros(p.horizon_steps, 2);
  for (std::size_t i = 0; i < u.steps; ++i) {
    u.at(i, 0) = 0.9;
    u.at(i, 1) = 0.37;
  }
  const auto traj = rollout(p.model, p.start, u);
  ASSERT_FALSE(traj.clamp_events.empty());
  const auto g = objective_gradient(u, phi, p);
  const auto fd = central_differences(u, phi, p, 1e-6);
  std::vector<double> diff(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - fd[i];
  EXPECT_LT(norm(diff) / norm(fd), 1e-4);
}

TEST(ObjectiveGradient, SingleIntegratorMatchesFiniteDifferences) {
  RobotModel m;
  m.kind = RobotKind::single_integrator;
  ErgodicProblem p{SpectralBasis(2, {1.0, 1.0}, 8), m, {0.5, 0.5}, 30};
  std::mt19937_64 rng(12);
  const auto phi = mixture_target(random_bimodal(rng), p.basis);
  std::uniform_real_distribution<double> v(-0.4, 0.4);
  auto u = ControlSequence::zeros(p.horizon_steps, 2);
  for (double& x : u.values) x = v(rng);
  const auto g = objective_gradient(u, phi, p);
  const auto fd = central_differences(u, phi, p, 1e-6);
  std::vector<double> diff(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) diff[i] = g[i] - fd[i];
  EXPECT_LT(norm(diff) / norm(fd), 1e-4);
}

TEST(ErgodicSearch, GaussianAtStartConverges) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.5, 0.5}, 0.1, 1.0}}, p.basis);
  const auto r = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  EXPECT_EQ(r.trace.reason, Termination::converged);
  EXPECT_LE(r.final_value.ergodic, 1e-3);
  EXPECT_LE(r.trace.iterations, 500);
}

TEST(ErgodicSearch, BimodalConvergesWithMonotoneTrace) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.25, 0.75}, 0.1, 1.0}, {{0.75, 0.25}, 0.1, 1.0}}, p.basis);
  const auto r = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  EXPECT_EQ(r.trace.reason, Termination::converged);
  EXPECT_LE(r.final_value.ergodic, 1e-3);
  ASSERT_EQ(r.trace.objective.size(), static_cast<std::size_t>(r.trace.iterations) + 1);
  for (std::size_t i = 1; i < r.trace.objective.size(); ++i) EXPECT_LT(r.trace.objective[i], r.trace.objective[i - 1]);
  EXPECT_EQ(project_controls(p.model, r.controls), r.controls);
  EXPECT_NEAR(r.trace.ergodic.back(), r.final_value.ergodic, 0.0);
}

TEST(ErgodicSearch, AlreadyConvergedReturnsImmediately) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.3, 0.6}, 0.12, 1.0}}, p.basis);
  const auto first = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  ASSERT_EQ(first.trace.reason, Termination::converged);
  const auto again = ergodic_search(phi, first.controls, p, ErgOptConfig{});
  EXPECT_EQ(again.trace.iterations, 0);
  EXPECT_EQ(again.controls, first.controls);
  EXPECT_EQ(again.trace.reason, Termination::converged);
}

TEST(ErgodicSearch, ProjectsInitialGuess) {
  const auto p = default_problem(6);
  const auto phi = mixture_target({{{0.3, 0.6}, 0.12, 1.0}}, p.basis);
  auto u = p.zero_controls();
  for (std::size_t i = 0; i < u.steps; ++i) u.at(i, 0) = -1.0;
  ErgOptConfig cfg;
  cfg.max_iters = 1;
  const auto r = ergodic_search(phi, u, p, cfg);
  EXPECT_EQ(r.trace.objective.front(), scalarized_objective(p.zero_controls(), phi, p).total());
  EXPECT_TRUE(within_bounds(p.model, r.controls));
}

TEST(ErgodicSearch, IterationCapIsReported) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.2, 0.2}, 0.08, 1.0}, {{0.8, 0.7}, 0.08, 1.0}}, p.basis);
  ErgOptConfig cfg;
  cfg.max_iters = 3;
  const auto r = ergodic_search(phi, p.zero_controls(), p, cfg);
  EXPECT_EQ(r.trace.reason, Termination::iter_cap);
  EXPECT_EQ(r.trace.iterations, 3);
  EXPECT_LT(r.trace.objective.back(), r.trace.objective.front());
}

TEST(ErgodicSearch, RejectsWrongHorizon) {
  const auto p = default_problem(4);
  EXPECT_THROW(ergodic_search(p.basis.zeros(), ControlSequence::zeros(5, 2), p, ErgOptConfig{}), std::invalid_argument);
}

TEST(ErgodicSearch, GradientMethodDescends) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.3, 0.7}, 0.12, 1.0}, {{0.7, 0.4}, 0.12, 1.0}}, p.basis);
  ErgOptConfig cfg;
  cfg.method = DescentMethod::gradient;
  cfg.max_iters = 300;
  const auto r = ergodic_search(phi, p.zero_controls(), p, cfg);
  ASSERT_GT(r.trace.iterations, 0);
  for (std::size_t i = 1; i < r.trace.objective.size(); ++i) EXPECT_LT(r.trace.objective[i], r.trace.objective[i - 1]);
  EXPECT_LT(r.final_value.total(), 0.5 * r.trace.objective.front());
}

TEST(ErgodicSearch, SingleIntegratorConverges) {
  RobotModel m;
  m.kind = RobotKind::single_integrator;
  m.speed_max = 1.0;
  ErgodicProblem p{SpectralBasis(2, {1.0, 1.0}, 10), m, {0.5, 0.5}, 100};
  const auto phi = mixture_target({{{0.3, 0.3}, 0.12, 1.0}, {{0.7, 0.6}, 0.12, 1.0}}, p.basis);
  const auto r = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  EXPECT_EQ(r.trace.reason, Termination::converged);
  EXPECT_TRUE(within_bounds(p.model, r.controls));
}

TEST(ErgodicSearch, Deterministic) {
  const auto p = default_problem();
  const auto phi = mixture_target({{{0.25, 0.75}, 0.1, 1.0}, {{0.75, 0.25}, 0.1, 1.0}}, p.basis);
  const auto a = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  const auto b = ergodic_search(phi, p.zero_controls(), p, ErgOptConfig{});
  EXPECT_EQ(a.controls, b.controls);
  EXPECT_EQ(a.trace.objective, b.trace.objective);
}

TEST(ErgodicSearch, WarmStartNeedsNoMoreIterationsThanZeroStart) {
  const auto p = default_problem();
  std::mt19937_64 rng(21);
  std::vector<int> warm, cold;
  for (int t = 0; t < 20; ++t) {
    const auto a = mixture_target(random_bimodal(rng), p.basis);
    const auto b = mixture_target(random_bimodal(rng), p.basis);
    auto mix = [&](double w) {
      CoeffTable c = a;
      for (std::size_t k = 0; k < c.size(); ++k) c.values[k] = w * a[k] + (1 - w) * b[k];
      return c;
    };
    const auto parent = ergodic_search(mix(0.5), p.zero_controls(), p, ErgOptConfig{});
    warm.push_back(ergodic_search(mix(0.6), parent.controls, p, ErgOptConfig{}).trace.iterations);
    cold.push_back(ergodic_search(mix(0.6), p.zero_controls(), p, ErgOptConfig{}).trace.iterations);
  }
  auto median = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  EXPECT_LE(median(warm), median(cold));
}
