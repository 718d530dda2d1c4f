#pragma once

// Single-objective ergodic trajectory optimization.
//
// The decision variable is the control sequence u. The objective is the
// ergodic metric of the rolled-out trajectory against a target coefficient
// table, plus a quadratic penalty on positions that had to be clamped back
// into the workspace. Gradients are exact for the discrete system and are
// computed by one backward sweep through the Euler steps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "moes/dynamics.hpp"
#include "moes/fourier.hpp"

namespace moes {

/// Everything an episode needs besides the target map and initial guess.
struct ErgodicProblem {
  SpectralBasis basis;
  RobotModel model;
  std::vector<double> start;
  std::size_t horizon_steps = 100;

  void validate() const {
    model.validate();
    if (static_cast<int>(start.size()) != model.state_dim())
      throw std::invalid_argument("problem: start state has wrong dimension");
    if (basis.dims() != model.position_dim())
      throw std::invalid_argument("problem: basis and workspace dimensions differ");
    for (int j = 0; j < model.position_dim(); ++j) {
      if (std::abs(basis.lengths()[j] - model.workspace[j]) > 1e-12)
        throw std::invalid_argument("problem: basis and workspace lengths differ");
      if (start[j] < 0.0 || start[j] > model.workspace[j])
        throw std::invalid_argument("problem: start position lies outside the workspace");
    }
    if (horizon_steps < 1) throw std::invalid_argument("problem: horizon must have at least one step");
  }
  ControlSequence zero_controls() const { return ControlSequence::zeros(horizon_steps, model.control_dim()); }
};

enum class DescentMethod { gauss_newton, gradient };

inline std::string to_string(DescentMethod m) { return m == DescentMethod::gauss_newton ? "gauss_newton" : "gradient"; }

inline DescentMethod descent_method_from_string(const std::string& s) {
  if (s == "gauss_newton") return DescentMethod::gauss_newton;
  if (s == "gradient") return DescentMethod::gradient;
  throw std::invalid_argument("unknown descent method '" + s + "'");
}

struct ErgOptConfig {
  double epsilon = 1e-3;
  int max_iters = 500;
  double step = 0.1;  // initial step for plain projected-gradient moves
  double shrink = 0.5;
  double armijo = 1e-4;
  double barrier = 100.0;
  // Accepted gradient steps enlarge the next trial step by this factor (1 disables).
  double growth = 2.0;
  int max_backtracks = 30;
  DescentMethod method = DescentMethod::gauss_newton;
  double damping = 1e-3;  // initial Levenberg-Marquardt damping

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
    if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
    if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("optimizer: shrink must lie in (0,1)");
    if (!(step > 0.0)) throw std::invalid_argument("optimizer: step must be positive");
    if (!(armijo > 0.0 && armijo < 1.0)) throw std::invalid_argument("optimizer: armijo constant must lie in (0,1)");
    if (!(barrier >= 0.0)) throw std::invalid_argument("optimizer: barrier weight must be >= 0");
    if (!(growth >= 1.0)) throw std::invalid_argument("optimizer: growth must be >= 1");
    if (max_backtracks < 1) throw std::invalid_argument("optimizer: max_backtracks must be >= 1");
    if (!(damping > 0.0)) throw std::invalid_argument("optimizer: damping must be positive");
  }
};

struct ObjectiveValue {
  double ergodic = 0.0;  // metric w.r.t. the target table
  double penalty = 0.0;  // boundary penalty
  double total() const { return ergodic + penalty; }
};

enum class Termination { converged, iter_cap, stalled };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::iter_cap: return "iter_cap";
    case Termination::stalled: return "stalled";
  }
  return "unknown";
}

struct EpisodeTrace {
  std::vector<double> objective;  // penalized objective, entry 0 is the initial guess
  std::vector<double> ergodic;    // metric part of the same iterates
  int iterations = 0;
  Termination reason = Termination::iter_cap;
};

struct EpisodeResult {
  ControlSequence controls;
  EpisodeTrace trace;
  ObjectiveValue final_value;
};

namespace detail {

struct Evaluation {
  Trajectory traj;
  TrajectoryCoefficients coeffs;
  ObjectiveValue value;
  std::vector<double> violation;  // (N+1) x position_dim
  std::vector<char> clamped;      // (N+1) x position_dim
};

inline Evaluation evaluate(const ControlSequence& u, const CoeffTable& target, const ErgodicProblem& problem,
                           double barrier) {
  const SpectralBasis& basis = problem.basis;
  const RobotModel& model = problem.model;
  require_shape(target, basis, "ergodic objective");
  if (u.dim != model.control_dim()) throw std::invalid_argument("ergodic objective: control dimension mismatch");
  if (u.steps < 1) throw std::invalid_argument("ergodic objective: empty control sequence");

  Evaluation ev;
  ev.traj = rollout(model, problem.start, u);
  // Samples are the states reached after each control, q(t_1) .. q(t_N).
  ev.coeffs = trajectory_coefficients(ev.traj.positions(1, u.steps), basis, model.dt);
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double r = ev.coeffs.coeffs[k] - target[k];
    ev.value.ergodic += basis.lambda(k) * r * r;
  }
  ev.value.penalty = barrier * ev.traj.clamp_penalty_sum();

  const int p = model.position_dim();
  ev.violation.assign((u.steps + 1) * p, 0.0);
  ev.clamped.assign((u.steps + 1) * p, 0);
  for (const auto& e : ev.traj.clamp_events) {
    ev.violation[e.step * p + e.axis] = e.violation;
    ev.clamped[e.step * p + e.axis] = 1;
  }
  return ev;
}

/// Reverse sweep through the Euler steps. `position_seed` holds dL/dq_i for
/// the (clamped) positions, `penalty_seed` dL/d(pre-clamp coordinate) for
/// clamped coordinates; both are (N+1) x position_dim. Steps after `last`
/// must carry zero seeds. Writes dL/du into `grad`.
inline void backpropagate(const Evaluation& ev, const ControlSequence& u, const RobotModel& model,
                          std::span<const double> position_seed, std::span<const double> penalty_seed,
                          std::size_t last, std::span<double> grad) {
  const int n = model.state_dim();
  const int p = model.position_dim();
  const double dt = model.dt;
  std::fill(grad.begin(), grad.end(), 0.0);
  double adj[3] = {0.0, 0.0, 0.0};
  double adj_pre[3] = {0.0, 0.0, 0.0};
  std::vector<double> adj_v;
  std::vector<double> adj_pre_v;
  double* a = adj;
  double* ap = adj_pre;
  if (n > 3) {
    adj_v.assign(n, 0.0);
    adj_pre_v.assign(n, 0.0);
    a = adj_v.data();
    ap = adj_pre_v.data();
  }
  for (std::size_t i = last; i >= 1; --i) {
    for (int j = 0; j < p; ++j) a[j] += position_seed[i * p + j];
    // A clamped coordinate does not depend on its pre-clamp value, which only
    // feeds the boundary penalty.
    for (int j = 0; j < n; ++j) ap[j] = a[j];
    for (int j = 0; j < p; ++j)
      if (ev.clamped[i * p + j]) ap[j] = penalty_seed[i * p + j];

    const auto prev = ev.traj.state(i - 1);
    double* g = &grad[(i - 1) * u.dim];
    if (model.kind == RobotKind::differential_drive) {
      const double v = u.at(i - 1, 0);
      const double ct = std::cos(prev[2]);
      const double st = std::sin(prev[2]);
      g[0] = (ap[0] * ct + ap[1] * st) * dt;
      g[1] = ap[2] * dt;
      a[0] = ap[0];
      a[1] = ap[1];
      a[2] = ap[2] + (-ap[0] * st + ap[1] * ct) * v * dt;
    } else {
      for (int j = 0; j < n; ++j) {
        g[j] = ap[j] * dt;
        a[j] = ap[j];
      }
    }
  }
}

inline std::vector<double> gradient(const Evaluation& ev, const ControlSequence& u, const CoeffTable& target,
                                    const ErgodicProblem& problem, double barrier) {
  const SpectralBasis& basis = problem.basis;
  const int p = problem.model.position_dim();
  const std::size_t n_samples = u.steps;
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  std::vector<double> weight(basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k)
    weight[k] = 2.0 * basis.lambda(k) * (ev.coeffs.coeffs[k] - target[k]) * inv_n;

  std::vector<double> pos_seed((n_samples + 1) * p, 0.0);
  std::vector<double> pen_seed((n_samples + 1) * p, 0.0);
  BasisEvaluator eval(basis);
  for (std::size_t i = 1; i <= n_samples; ++i)
    eval.accumulate_gradient(ev.traj.state(i).first(p), weight, std::span<double>(pos_seed).subspan(i * p, p));
  for (std::size_t idx = 0; idx < pen_seed.size(); ++idx) pen_seed[idx] = 2.0 * barrier * ev.violation[idx];

  std::vector<double> grad(u.values.size());
  backpropagate(ev, u, problem.model, pos_seed, pen_seed, n_samples, grad);
  return grad;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Residual vector r (objective = |r|^2) and its Jacobian w.r.t. the controls.
/// Rows: sqrt(lambda_k) (c_k - target_k) for every k, then sqrt(barrier) times
/// each clamp violation.
inline void linearize(const Evaluation& ev, const ControlSequence& u, const CoeffTable& target,
                      const ErgodicProblem& problem, double barrier, Eigen::VectorXd& r, RowMatrix& jac) {
  const SpectralBasis& basis = problem.basis;
  const int p = problem.model.position_dim();
  const std::size_t n_samples = u.steps;
  const std::size_t nk = basis.size();
  const std::size_t rows = nk + ev.traj.clamp_events.size();
  const double inv_n = 1.0 / static_cast<double>(n_samples);
  r.resize(static_cast<Eigen::Index>(rows));
  jac.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(u.values.size()));

  std::vector<double> basis_grad(n_samples * nk * p);
  BasisEvaluator eval(basis);
  for (std::size_t i = 1; i <= n_samples; ++i)
    eval.gradients(ev.traj.state(i).first(p), std::span<double>(basis_grad).subspan((i - 1) * nk * p, nk * p));

  std::vector<double> pos_seed((n_samples + 1) * p, 0.0);
  std::vector<double> pen_seed((n_samples + 1) * p, 0.0);
  for (std::size_t k = 0; k < nk; ++k) {
    const double sl = std::sqrt(basis.lambda(k));
    r[static_cast<Eigen::Index>(k)] = sl * (ev.coeffs.coeffs[k] - target[k]);
    for (std::size_t i = 1; i <= n_samples; ++i)
      for (int j = 0; j < p; ++j) pos_seed[i * p + j] = sl * inv_n * basis_grad[((i - 1) * nk + k) * p + j];
    backpropagate(ev, u, problem.model, pos_seed, pen_seed, n_samples,
                  std::span<double>(jac.row(static_cast<Eigen::Index>(k)).data(), u.values.size()));
  }

  std::fill(pos_seed.begin(), pos_seed.end(), 0.0);
  const double sb = std::sqrt(barrier);
  for (std::size_t e = 0; e < ev.traj.clamp_events.size(); ++e) {
    const auto& ce = ev.traj.clamp_events[e];
    const std::size_t slot = ce.step * p + ce.axis;
    r[static_cast<Eigen::Index>(nk + e)] = sb * ce.violation;
    pen_seed[slot] = sb;
    backpropagate(ev, u, problem.model, pos_seed, pen_seed, ce.step,
                  std::span<double>(jac.row(static_cast<Eigen::Index>(nk + e)).data(), u.values.size()));
    pen_seed[slot] = 0.0;
  }
}

/// Damped Gauss-Newton direction restricted to the variables that are not
/// pinned at an active bound.
inline std::vector<double> gauss_newton_direction(const Evaluation& ev, const ControlSequence& u,
                                                  const CoeffTable& target, const ErgodicProblem& problem,
                                                  double barrier, double damping, std::span<const double> grad) {
  Eigen::VectorXd r;
  RowMatrix jac;
  linearize(ev, u, target, problem, barrier, r, jac);

  const RobotModel& model = problem.model;
  std::vector<Eigen::Index> free;
  for (std::size_t idx = 0; idx < u.values.size(); ++idx) {
    const int axis = static_cast<int>(idx % static_cast<std::size_t>(u.dim));
    const bool pinned_low = u.values[idx] <= model.lower_bound(axis) && grad[idx] > 0.0;
    const bool pinned_high = u.values[idx] >= model.upper_bound(axis) && grad[idx] < 0.0;
    if (!pinned_low && !pinned_high) free.push_back(static_cast<Eigen::Index>(idx));
  }
  std::vector<double> dir(u.values.size(), 0.0);
  if (free.empty()) return dir;

  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  RowMatrix jf(jac.rows(), nf);
  for (Eigen::Index c = 0; c < nf; ++c) jf.col(c) = jac.col(free[c]);
  Eigen::MatrixXd h = jf.transpose() * jf;
  const Eigen::VectorXd g = jf.transpose() * r;
  const double floor = 1e-10 * std::max(1.0, h.diagonal().maxCoeff());
  for (Eigen::Index c = 0; c < nf; ++c) h(c, c) += damping * std::max(h(c, c), floor);
  const Eigen::VectorXd step = h.ldlt().solve(-g);
  for (Eigen::Index c = 0; c < nf; ++c) dir[static_cast<std::size_t>(free[c])] = step[c];
  return dir;
}

/// Backtracking along the projected path u(t) = P(u + t * dir), t = t0, t0*shrink, ...
/// Accepts the first t with a strict Armijo decrease. Returns the accepted t or 0.
inline double projected_line_search(const ControlSequence& u, const Evaluation& ev, std::span<const double> grad,
                                    std::span<const double> dir, double t0, const CoeffTable& target,
                                    const ErgodicProblem& problem, const ErgOptConfig& cfg, ControlSequence& trial) {
  const RobotModel& model = problem.model;
  const double f0 = ev.value.total();
  double t = t0;
  for (int bt = 0; bt < cfg.max_backtracks; ++bt, t *= cfg.shrink) {
    double slope = 0.0;
    bool moved = false;
    for (std::size_t idx = 0; idx < u.values.size(); ++idx) {
      const int axis = static_cast<int>(idx % static_cast<std::size_t>(u.dim));
      const double x = std::clamp(u.values[idx] + t * dir[idx], model.lower_bound(axis), model.upper_bound(axis));
      trial.values[idx] = x;
      slope += grad[idx] * (x - u.values[idx]);
      moved = moved || x != u.values[idx];
    }
    if (!moved || !(slope < 0.0)) return 0.0;
    const double f = evaluate(trial, target, problem, cfg.barrier).value.total();
    if (f < f0 && f <= f0 + cfg.armijo * slope) return t;
  }
  return 0.0;
}

/// Feasible probe moves tried when descent makes no progress. Each is a
/// constant control added to every step: forward motion along circles of a
/// few radii (both turning senses) and a straight line for the differential
/// drive; slow counter-clockwise and clockwise circles for the single
/// integrator.
inline std::vector<ControlSequence> escape_directions(const ErgodicProblem& problem) {
  const RobotModel& model = problem.model;
  const std::size_t n = problem.horizon_steps;
  std::vector<ControlSequence> dirs;
  if (model.kind == RobotKind::differential_drive) {
    const double scale = std::min(model.workspace[0], model.workspace[1]);
    std::vector<double> turns;
    for (double radius : {0.25, 0.1, 0.05}) {
      turns.push_back(model.v_max / (radius * scale));
      turns.push_back(-model.v_max / (radius * scale));
    }
    turns.push_back(0.0);
    for (double w : turns) {
      ControlSequence d = ControlSequence::zeros(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        d.at(i, 0) = model.v_max;
        d.at(i, 1) = w;
      }
      dirs.push_back(std::move(d));
    }
  } else {
    for (double sign : {1.0, -1.0}) {
      ControlSequence d = ControlSequence::zeros(n, model.control_dim());
      for (std::size_t i = 0; i < n; ++i) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        d.at(i, 0) = model.speed_max * std::cos(phase);
        if (d.dim > 1) d.at(i, 1) = sign * model.speed_max * std::sin(phase);
      }
      dirs.push_back(std::move(d));
    }
  }
  return dirs;
}

/// Tries probe moves P(u + t * d) at a few scales t and keeps the best one that
/// strictly lowers the penalized objective. Returns false if none does.
inline bool escape_stationary_point(const ControlSequence& u, double f0, const CoeffTable& target,
                                    const ErgodicProblem& problem, const ErgOptConfig& cfg, ControlSequence& out) {
  double best = f0;
  bool found = false;
  ControlSequence probe = u;
  for (const auto& d : escape_directions(problem)) {
    for (double t = 1.0; t >= 1.0 / 16.0; t *= 0.5) {
      for (std::size_t idx = 0; idx < u.values.size(); ++idx) probe.values[idx] = u.values[idx] + t * d.values[idx];
      probe = project_controls(problem.model, std::move(probe));
      const double f = evaluate(probe, target, problem, cfg.barrier).value.total();
      if (f < best) {
        best = f;
        out = probe;
        found = true;
      }
    }
  }
  return found;
}

}  // namespace detail

/// Ergodic metric w.r.t. `target` (and the boundary penalty) of the trajectory generated by `u`.
inline ObjectiveValue scalarized_objective(const ControlSequence& u, const CoeffTable& target,
                                           const ErgodicProblem& problem, double barrier = ErgOptConfig{}.barrier) {
  return detail::evaluate(u, target, problem, barrier).value;
}

/// Gradient of the penalized objective w.r.t. every control entry (same layout as u.values).
inline std::vector<double> objective_gradient(const ControlSequence& u, const CoeffTable& target,
                                              const ErgodicProblem& problem,
                                              double barrier = ErgOptConfig{}.barrier) {
  const auto ev = detail::evaluate(u, target, problem, barrier);
  return detail::gradient(ev, u, target, problem, barrier);
}

/// Projected descent with Armijo backtracking along the projected path,
/// started from `u_init` (projected first). Stops once the ergodic metric is
/// <= epsilon or the iteration cap is reached.
///
/// Each iteration tries, in order, until one strictly lowers the penalized
/// objective: the damped Gauss-Newton direction (gauss_newton method only),
/// the negative gradient, and a fixed set of probe moves that let the robot
/// leave degenerate stationary points such as the zero control.
inline EpisodeResult ergodic_search(const CoeffTable& target, const ControlSequence& u_init,
                                    const ErgodicProblem& problem, const ErgOptConfig& cfg) {
  cfg.validate();
  if (u_init.steps != problem.horizon_steps || u_init.dim != problem.model.control_dim())
    throw std::invalid_argument("ergodic_search: initial controls do not match the problem horizon");
  ControlSequence u = project_controls(problem.model, u_init);
  detail::Evaluation ev = detail::evaluate(u, target, problem, cfg.barrier);

  EpisodeTrace trace;
  trace.objective.push_back(ev.value.total());
  trace.ergodic.push_back(ev.value.ergodic);

  double alpha = cfg.step;
  double damping = cfg.damping;
  ControlSequence trial = u;
  for (;;) {
    if (ev.value.ergodic <= cfg.epsilon) {
      trace.reason = Termination::converged;
      break;
    }
    if (trace.iterations >= cfg.max_iters) {
      trace.reason = Termination::iter_cap;
      break;
    }

    const std::vector<double> grad = detail::gradient(ev, u, target, problem, cfg.barrier);
    bool accepted = false;
    if (cfg.method == DescentMethod::gauss_newton) {
      const auto dir = detail::gauss_newton_direction(ev, u, target, problem, cfg.barrier, damping, grad);
      const double t = detail::projected_line_search(u, ev, grad, dir, 1.0, target, problem, cfg, trial);
      if (t > 0.0) {
        accepted = true;
        damping = (t == 1.0) ? std::max(damping / 3.0, 1e-9) : std::min(damping * 4.0, 1e6);
      } else {
        damping = std::min(damping * 10.0, 1e6);
      }
    }
    if (!accepted) {
      std::vector<double> neg(grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i) neg[i] = -grad[i];
      const double t = detail::projected_line_search(u, ev, grad, neg, alpha, target, problem, cfg, trial);
      if (t > 0.0) {
        accepted = true;
        alpha = t * cfg.growth;
      }
    }
    if (!accepted && !detail::escape_stationary_point(u, ev.value.total(), target, problem, cfg, trial)) {
      trace.reason = Termination::stalled;
      break;
    }

    std::swap(u, trial);
    ev = detail::evaluate(u, target, problem, cfg.barrier);
    ++trace.iterations;
    trace.objective.push_back(ev.value.total());
    trace.ergodic.push_back(ev.value.ergodic);
  }
  return EpisodeResult{std::move(u), std::move(trace), ev.value};
}

}  // namespace moes
