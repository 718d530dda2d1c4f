#pragma once

// Robot models, explicit-Euler rollout and control projection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace moes {

enum class RobotKind { differential_drive, single_integrator };

inline std::string to_string(RobotKind kind) {
  return kind == RobotKind::differential_drive ? "differential_drive" : "single_integrator";
}

inline RobotKind robot_kind_from_string(const std::string& s) {
  if (s == "differential_drive") return RobotKind::differential_drive;
  if (s == "single_integrator") return RobotKind::single_integrator;
  throw std::invalid_argument("unknown robot kind '" + s + "'");
}

/// Kinematic model on a box workspace.
///
/// Differential drive: state (x, y, theta), control (v, omega) with
/// v in [0, v_max] (forward motion only) and omega in [-omega_max, omega_max].
/// Single integrator: state = position, control = velocity, each axis in
/// [-speed_max, speed_max].
struct RobotModel {
  RobotKind kind = RobotKind::differential_drive;
  std::vector<double> workspace{1.0, 1.0};
  double v_max = 2.0;
  double omega_max = 12.0;
  double speed_max = 0.5;
  double dt = 0.1;

  int position_dim() const { return static_cast<int>(workspace.size()); }
  int state_dim() const {
    return kind == RobotKind::differential_drive ? 3 : position_dim();
  }
  int control_dim() const {
    return kind == RobotKind::differential_drive ? 2 : position_dim();
  }
  double lower_bound(int axis) const {
    if (kind == RobotKind::differential_drive) return axis == 0 ? 0.0 : -omega_max;
    return -speed_max;
  }
  double upper_bound(int axis) const {
    if (kind == RobotKind::differential_drive) return axis == 0 ? v_max : omega_max;
    return speed_max;
  }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("model: dt must be positive");
    if (workspace.empty()) throw std::invalid_argument("model: workspace has no dimensions");
    for (double l : workspace)
      if (!(l > 0.0)) throw std::invalid_argument("model: workspace lengths must be positive");
    if (kind == RobotKind::differential_drive) {
      if (workspace.size() != 2) throw std::invalid_argument("model: differential drive needs a 2-D workspace");
      if (!(v_max > 0.0)) throw std::invalid_argument("model: v_max must be positive");
      if (!(omega_max > 0.0)) throw std::invalid_argument("model: omega_max must be positive");
    } else if (!(speed_max > 0.0)) {
      throw std::invalid_argument("model: speed_max must be positive");
    }
  }
};

/// N x control_dim controls, row-major.
struct ControlSequence {
  std::size_t steps = 0;
  int dim = 0;
  std::vector<double> values;

  static ControlSequence zeros(std::size_t steps, int dim) {
    return ControlSequence{steps, dim, std::vector<double>(steps * static_cast<std::size_t>(dim), 0.0)};
  }
  double& at(std::size_t step, int axis) { return values[step * dim + axis]; }
  double at(std::size_t step, int axis) const { return values[step * dim + axis]; }
  std::span<const double> row(std::size_t step) const {
    return {values.data() + step * dim, static_cast<std::size_t>(dim)};
  }
  double horizon(double dt) const { return dt * static_cast<double>(steps); }

  bool operator==(const ControlSequence&) const = default;
};

struct ClampEvent {
  std::size_t step = 0;  // index of the state that was clamped (1..N)
  int axis = 0;
  double violation = 0.0;  // unclamped - clamped
};

/// (N+1) x state_dim states, row-major. The first position_dim state entries
/// are the workspace coordinates.
struct Trajectory {
  std::size_t steps = 0;
  int state_dim = 0;
  int position_dim = 0;
  std::vector<double> states;
  std::vector<ClampEvent> clamp_events;

  std::span<const double> state(std::size_t i) const {
    return {states.data() + i * state_dim, static_cast<std::size_t>(state_dim)};
  }
  /// Workspace positions of states first..last inclusive, packed.
  std::vector<double> positions(std::size_t first, std::size_t last) const {
    std::vector<double> out;
    out.reserve((last - first + 1) * position_dim);
    for (std::size_t i = first; i <= last; ++i)
      for (int j = 0; j < position_dim; ++j) out.push_back(states[i * state_dim + j]);
    return out;
  }
  double clamp_penalty_sum() const {
    double s = 0.0;
    for (const auto& e : clamp_events) s += e.violation * e.violation;
    return s;
  }
};

inline ControlSequence project_controls(const RobotModel& model, ControlSequence u) {
  for (std::size_t i = 0; i < u.steps; ++i)
    for (int a = 0; a < u.dim; ++a)
      u.at(i, a) = std::clamp(u.at(i, a), model.lower_bound(a), model.upper_bound(a));
  return u;
}

inline bool within_bounds(const RobotModel& model, const ControlSequence& u) {
  for (std::size_t i = 0; i < u.steps; ++i)
    for (int a = 0; a < u.dim; ++a)
      if (u.at(i, a) < model.lower_bound(a) || u.at(i, a) > model.upper_bound(a)) return false;
  return true;
}

/// Explicit Euler forward simulation. Positions leaving the workspace are
/// clamped to its boundary and recorded as clamp events.
inline Trajectory rollout(const RobotModel& model, std::span<const double> start, const ControlSequence& u) {
  const int n = model.state_dim();
  const int p = model.position_dim();
  if (static_cast<int>(start.size()) != n) throw std::invalid_argument("rollout: start state has wrong dimension");
  if (u.dim != model.control_dim()) throw std::invalid_argument("rollout: control dimension mismatch");

  Trajectory traj{u.steps, n, p, std::vector<double>((u.steps + 1) * n), {}};
  std::copy(start.begin(), start.end(), traj.states.begin());
  const double dt = model.dt;
  for (std::size_t i = 0; i < u.steps; ++i) {
    const double* s = &traj.states[i * n];
    double* next = &traj.states[(i + 1) * n];
    if (model.kind == RobotKind::differential_drive) {
      const double v = u.at(i, 0);
      const double w = u.at(i, 1);
      next[0] = s[0] + v * std::cos(s[2]) * dt;
      next[1] = s[1] + v * std::sin(s[2]) * dt;
      next[2] = s[2] + w * dt;
    } else {
      for (int j = 0; j < n; ++j) next[j] = s[j] + u.at(i, j) * dt;
    }
    for (int j = 0; j < p; ++j) {
      const double clamped = std::clamp(next[j], 0.0, model.workspace[j]);
      if (clamped != next[j]) {
        traj.clamp_events.push_back({i + 1, j, next[j] - clamped});
        next[j] = clamped;
      }
    }
  }
  return traj;
}

inline std::vector<double> default_start(const RobotModel& model) {
  std::vector<double> s(model.state_dim(), 0.0);
  for (int j = 0; j < model.position_dim(); ++j) s[j] = 0.5 * model.workspace[j];
  return s;
}

}  // namespace moes
