#pragma once

// Experiment plumbing behind the command line tool: JSON configuration,
// benchmark map construction, the plan / moes / sweep / hv / dist runners and
// their CSV and JSON outputs. Outputs contain no timestamps or host data, so
// equal configs and seeds produce byte-identical files.
//
// Config layout (all sections optional except "maps"):
//   maps        list of {"mixture": [...]} | {"mixture_file": path} | {"grid_csv": path},
//               each with an optional "jitter" (uniform mean offset, seeded)
//   resolution  raster cells per axis for mixtures (default 256)
//   basis       {"k_max"}
//   model       {"kind", "workspace", "v_max", "omega_max", "speed_max", "dt", "steps", "start"}
//   optimizer   {"epsilon", "max_iters", "step", "barrier", "method", "damping"}
//   planner     {"mode", "d", "d_prime", "d_prime_list", "d_prime_scales", "w_init", "rho",
//                "edge_length", "weight"}
//   evaluation  {"reference"}
//   seed, output
// Relative paths are resolved against the config file's directory.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "moes/dynamics.hpp"
#include "moes/ergopt.hpp"
#include "moes/fourier.hpp"
#include "moes/maps.hpp"
#include "moes/metrics.hpp"
#include "moes/planner.hpp"

namespace moes {

namespace fs = std::filesystem;
using nlohmann::json;

/// Configuration error naming the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& msg) : std::runtime_error("config: " + field + ": " + msg) {}
};

enum class PlannerMode { sles, asles, scala };

inline std::string to_string(PlannerMode m) {
  switch (m) {
    case PlannerMode::sles: return "sles";
    case PlannerMode::asles: return "asles";
    case PlannerMode::scala: return "scala";
  }
  return "unknown";
}

inline PlannerMode planner_mode_from_string(const std::string& s) {
  if (s == "sles") return PlannerMode::sles;
  if (s == "asles") return PlannerMode::asles;
  if (s == "scala") return PlannerMode::scala;
  throw std::invalid_argument("unknown mode '" + s + "' (expected sles, asles or scala)");
}

struct MapSource {
  std::optional<GaussianMixture> mixture;
  std::optional<fs::path> grid_csv;
  double jitter = 0.0;
  std::string label;
};

struct ExperimentConfig {
  std::vector<MapSource> maps;
  int resolution = kDefaultCells;
  int k_max = 10;
  RobotModel model;
  std::size_t steps = 100;
  std::optional<std::vector<double>> start;
  ErgOptConfig optimizer;
  PlannerMode mode = PlannerMode::sles;
  double d = 0.1;
  double d_prime = 0.05;
  std::vector<double> d_prime_list;
  std::vector<double> d_prime_scales;  // multiples of the distance between maps 1 and 2
  std::optional<std::vector<double>> w_init;
  bool w_init_random = false;
  std::optional<int> rho;
  EdgeLength edge_length = EdgeLength::sqrt_metric;
  std::optional<std::vector<double>> weight;  // scalarization weight for plan
  std::optional<std::vector<double>> reference;
  std::uint64_t seed = 0;
  fs::path output = "out";
};

namespace detail {

template <class T>
T field(const json& obj, const char* key, const std::string& path, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

template <class T>
std::optional<T> optional_field(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  if (!root.at(key).is_object()) throw ConfigError(key, "must be an object");
  return root.at(key);
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class Fn>
void check(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root, const fs::path& base_dir = ".") {
  if (!root.is_object()) throw ConfigError("<root>", "must be a JSON object");
  ExperimentConfig cfg;

  if (!root.contains("maps") || !root.at("maps").is_array() || root.at("maps").empty())
    throw ConfigError("maps", "expected a non-empty list of map sources");
  const auto& maps = root.at("maps");
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string where = "maps[" + std::to_string(i) + "]";
    const json& m = maps[i];
    if (!m.is_object()) throw ConfigError(where, "must be an object");
    MapSource src;
    src.jitter = detail::field(m, "jitter", where, 0.0);
    if (src.jitter < 0.0) throw ConfigError(where + ".jitter", "must be >= 0");
    src.label = detail::field<std::string>(m, "label", where, "map" + std::to_string(i + 1));
    const int kinds = int(m.contains("mixture")) + int(m.contains("mixture_file")) + int(m.contains("grid_csv"));
    if (kinds != 1) throw ConfigError(where, "needs exactly one of mixture, mixture_file, grid_csv");
    if (m.contains("mixture")) {
      detail::check(where + ".mixture", [&] { src.mixture = mixture_from_json(m.at("mixture")); });
    } else if (m.contains("mixture_file")) {
      const fs::path p = detail::resolve(base_dir, detail::field<std::string>(m, "mixture_file", where, ""));
      if (!fs::exists(p)) throw ConfigError(where + ".mixture_file", "file not found: " + p.string());
      detail::check(where + ".mixture_file", [&] { src.mixture = mixture_from_json(read_json_file(p)); });
    } else {
      const fs::path p = detail::resolve(base_dir, detail::field<std::string>(m, "grid_csv", where, ""));
      if (!fs::exists(p)) throw ConfigError(where + ".grid_csv", "file not found: " + p.string());
      src.grid_csv = p;
    }
    cfg.maps.push_back(std::move(src));
  }
  cfg.resolution = detail::field(root, "resolution", "<root>", cfg.resolution);
  if (cfg.resolution < 1) throw ConfigError("resolution", "must be >= 1");

  const json& basis = detail::section(root, "basis");
  cfg.k_max = detail::field(basis, "k_max", "basis", cfg.k_max);
  if (cfg.k_max < 0) throw ConfigError("basis.k_max", "must be >= 0");

  const json& model = detail::section(root, "model");
  detail::check("model.kind", [&] {
    cfg.model.kind = robot_kind_from_string(detail::field<std::string>(model, "kind", "model", "differential_drive"));
  });
  cfg.model.workspace = detail::field(model, "workspace", "model", cfg.model.workspace);
  cfg.model.v_max = detail::field(model, "v_max", "model", cfg.model.v_max);
  cfg.model.omega_max = detail::field(model, "omega_max", "model", cfg.model.omega_max);
  cfg.model.speed_max = detail::field(model, "speed_max", "model", cfg.model.speed_max);
  cfg.model.dt = detail::field(model, "dt", "model", cfg.model.dt);
  const int steps = detail::field(model, "steps", "model", static_cast<int>(cfg.steps));
  if (steps < 1) throw ConfigError("model.steps", "must be >= 1");
  cfg.steps = static_cast<std::size_t>(steps);
  cfg.start = detail::optional_field<std::vector<double>>(model, "start", "model");
  detail::check("model", [&] { cfg.model.validate(); });

  const json& opt = detail::section(root, "optimizer");
  cfg.optimizer.epsilon = detail::field(opt, "epsilon", "optimizer", cfg.optimizer.epsilon);
  cfg.optimizer.max_iters = detail::field(opt, "max_iters", "optimizer", cfg.optimizer.max_iters);
  cfg.optimizer.step = detail::field(opt, "step", "optimizer", cfg.optimizer.step);
  cfg.optimizer.barrier = detail::field(opt, "barrier", "optimizer", cfg.optimizer.barrier);
  cfg.optimizer.damping = detail::field(opt, "damping", "optimizer", cfg.optimizer.damping);
  detail::check("optimizer.method", [&] {
    cfg.optimizer.method = descent_method_from_string(detail::field<std::string>(opt, "method", "optimizer", "gauss_newton"));
  });
  detail::check("optimizer", [&] { cfg.optimizer.validate(); });

  const json& pl = detail::section(root, "planner");
  detail::check("planner.mode",
                [&] { cfg.mode = planner_mode_from_string(detail::field<std::string>(pl, "mode", "planner", "sles")); });
  cfg.d = detail::field(pl, "d", "planner", cfg.d);
  if (!(cfg.d > 0.0 && cfg.d < 1.0)) throw ConfigError("planner.d", "must lie in (0,1)");
  cfg.d_prime = detail::field(pl, "d_prime", "planner", cfg.d_prime);
  if (!(cfg.d_prime > 0.0)) throw ConfigError("planner.d_prime", "must be positive");
  cfg.d_prime_list = detail::field(pl, "d_prime_list", "planner", cfg.d_prime_list);
  cfg.d_prime_scales = detail::field(pl, "d_prime_scales", "planner", cfg.d_prime_scales);
  for (double v : cfg.d_prime_list)
    if (!(v > 0.0)) throw ConfigError("planner.d_prime_list", "entries must be positive");
  for (double v : cfg.d_prime_scales)
    if (!(v > 0.0)) throw ConfigError("planner.d_prime_scales", "entries must be positive");
  if (pl.contains("w_init") && pl.at("w_init").is_string()) {
    if (pl.at("w_init").get<std::string>() != "random")
      throw ConfigError("planner.w_init", "must be a weight list or \"random\"");
    cfg.w_init_random = true;
  } else {
    cfg.w_init = detail::optional_field<std::vector<double>>(pl, "w_init", "planner");
    if (cfg.w_init) detail::check("planner.w_init", [&] { validate_weight(WeightVector{*cfg.w_init}); });
  }
  cfg.rho = detail::optional_field<int>(pl, "rho", "planner");
  if (cfg.rho && *cfg.rho < 0) throw ConfigError("planner.rho", "must be >= 0");
  detail::check("planner.edge_length", [&] {
    cfg.edge_length = edge_length_from_string(detail::field<std::string>(pl, "edge_length", "planner", "sqrt"));
  });
  cfg.weight = detail::optional_field<std::vector<double>>(pl, "weight", "planner");
  if (cfg.weight) detail::check("planner.weight", [&] { validate_weight(WeightVector{*cfg.weight}); });

  const json& ev = detail::section(root, "evaluation");
  cfg.reference = detail::optional_field<std::vector<double>>(ev, "reference", "evaluation");

  cfg.seed = detail::field<std::uint64_t>(root, "seed", "<root>", 0);
  cfg.output = detail::resolve(base_dir, detail::field<std::string>(root, "output", "<root>", "out"));

  if (cfg.w_init && cfg.w_init->size() != cfg.maps.size())
    throw ConfigError("planner.w_init", "length must equal the number of maps");
  if (cfg.weight && cfg.weight->size() != cfg.maps.size())
    throw ConfigError("planner.weight", "length must equal the number of maps");
  if (cfg.reference && cfg.reference->size() != cfg.maps.size())
    throw ConfigError("evaluation.reference", "length must equal the number of maps");
  return cfg;
}

inline ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path.string());
  return parse_config(read_json_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Seeded randomness
// ---------------------------------------------------------------------------

// Uniform in [0,1) from the top 53 bits; avoids distribution objects whose
// output differs between standard library implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform sample from the open simplex (normalized exponentials).
inline WeightVector random_weight(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
  WeightVector w;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w.w.push_back(-std::log(1.0 - unit_uniform(rng)) + 1e-12);
    sum += w.w.back();
  }
  for (double& x : w.w) x /= sum;
  return w;
}

/// Shifts every component mean by a uniform offset in [-amount, amount],
/// clamped into the workspace.
inline GaussianMixture jitter_mixture(GaussianMixture mix, double amount, std::uint64_t seed,
                                      const std::vector<double>& lengths) {
  if (amount <= 0.0) return mix;
  std::mt19937_64 rng(seed);
  for (auto& g : mix)
    for (std::size_t j = 0; j < g.mean.size(); ++j)
      g.mean[j] = std::clamp(g.mean[j] + amount * (2.0 * unit_uniform(rng) - 1.0), 0.0, lengths[j]);
  return mix;
}

// ---------------------------------------------------------------------------
// Building the problem
// ---------------------------------------------------------------------------

struct Experiment {
  ExperimentConfig config;
  SpectralBasis basis;
  ErgodicProblem problem;
  std::vector<InfoMap> maps;
};

inline Experiment build_experiment(const ExperimentConfig& cfg) {
  const auto& ws = cfg.model.workspace;
  SpectralBasis basis(static_cast<int>(ws.size()), ws, cfg.k_max);
  std::vector<InfoMap> maps;
  for (std::size_t i = 0; i < cfg.maps.size(); ++i) {
    const auto& src = cfg.maps[i];
    const std::string where = "maps[" + std::to_string(i) + "]";
    GridDensity grid;
    if (src.mixture) {
      std::vector<int> cells(ws.size(), cfg.resolution);
      const auto mix = jitter_mixture(*src.mixture, src.jitter, cfg.seed * 1000003ULL + i, ws);
      detail::check(where, [&] { grid = rasterize_mixture(mix, ws, cells); });
    } else {
      detail::check(where + ".grid_csv", [&] { grid = read_grid_csv(*src.grid_csv); });
    }
    detail::check(where, [&] { maps.push_back(make_info_map(std::move(grid), basis)); });
  }
  std::vector<double> start = cfg.start.value_or(default_start(cfg.model));
  ErgodicProblem problem{basis, cfg.model, std::move(start), cfg.steps};
  detail::check("model", [&] { problem.validate(); });
  return Experiment{cfg, basis, std::move(problem), std::move(maps)};
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const fs::path& path, const json& j) { open_output(path) << j.dump(2) << '\n'; }

inline std::vector<std::string> state_names(const RobotModel& model) {
  if (model.kind == RobotKind::differential_drive) return {"x", "y", "theta"};
  std::vector<std::string> n;
  for (int j = 0; j < model.position_dim(); ++j) n.push_back("x" + std::to_string(j + 1));
  return n;
}

inline std::vector<std::string> control_names(const RobotModel& model) {
  if (model.kind == RobotKind::differential_drive) return {"v", "omega"};
  std::vector<std::string> n;
  for (int j = 0; j < model.position_dim(); ++j) n.push_back("u" + std::to_string(j + 1));
  return n;
}

/// Row i holds time t_i, state i and the control applied from state i; the
/// final row has no control.
inline void write_trajectory_csv(std::ostream& out, const RobotModel& model, const Trajectory& traj,
                                 const ControlSequence& u) {
  out << "t";
  for (const auto& n : state_names(model)) out << ',' << n;
  for (const auto& n : control_names(model)) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i <= traj.steps; ++i) {
    out << num(model.dt * static_cast<double>(i));
    for (double s : traj.state(i)) out << ',' << num(s);
    for (int a = 0; a < u.dim; ++a) out << ',' << (i < u.steps ? num(u.at(i, a)) : std::string());
    out << '\n';
  }
}

inline void write_trace_header(std::ostream& out) { out << "episode,iteration,objective,ergodic\n"; }

inline void write_trace_rows(std::ostream& out, std::size_t episode, const EpisodeTrace& trace) {
  for (std::size_t i = 0; i < trace.objective.size(); ++i)
    out << episode << ',' << i << ',' << num(trace.objective[i]) << ',' << num(trace.ergodic[i]) << '\n';
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanOutcome {
  EpisodeResult episode;
  Trajectory trajectory;
  WeightVector weight;
};

inline PlanOutcome run_plan(const Experiment& ex) {
  const auto& cfg = ex.config;
  WeightVector w;
  if (cfg.weight) {
    w = WeightVector{*cfg.weight};
  } else if (ex.maps.size() == 1) {
    w = WeightVector{{1.0}};
  } else {
    throw ConfigError("planner.weight", "plan needs exactly one map or an explicit weight");
  }
  CoeffTable target = ex.maps.front().coeffs;
  if (ex.maps.size() > 1) target = scalarize(MapFamily(ex.maps, ex.basis), w);
  PlanOutcome out{ergodic_search(target, ex.problem.zero_controls(), ex.problem, cfg.optimizer), {}, w};
  out.trajectory = rollout(ex.problem.model, ex.problem.start, out.episode.controls);
  return out;
}

inline json plan_summary(const Experiment& ex, const PlanOutcome& r) {
  return {{"command", "plan"},
          {"weight", r.weight.w},
          {"final_ergodic", r.episode.final_value.ergodic},
          {"final_penalty", r.episode.final_value.penalty},
          {"initial_ergodic", r.episode.trace.ergodic.front()},
          {"iterations", r.episode.trace.iterations},
          {"termination", to_string(r.episode.trace.reason)},
          {"epsilon", ex.config.optimizer.epsilon},
          {"max_iters", ex.config.optimizer.max_iters},
          {"method", to_string(ex.config.optimizer.method)},
          {"clamp_events", r.trajectory.clamp_events.size()},
          {"seed", ex.config.seed}};
}

inline void write_plan(const fs::path& dir, const Experiment& ex, const PlanOutcome& r) {
  {
    auto out = open_output(dir / "trajectory.csv");
    write_trajectory_csv(out, ex.problem.model, r.trajectory, r.episode.controls);
  }
  {
    auto out = open_output(dir / "trace.csv");
    write_trace_header(out);
    write_trace_rows(out, 0, r.episode.trace);
  }
  write_json(dir / "summary.json", plan_summary(ex, r));
}

// ---------------------------------------------------------------------------
// moes
// ---------------------------------------------------------------------------

struct MoesOutcome {
  PlannerMode mode;
  std::optional<SlesResult> sles;  // unset for scala
  ParetoArchive archive;
  HypervolumeReport hv_report;
  double hypervolume = 0.0;
  double d_prime = 0.0;
  WeightVector w_init;
};

inline WeightVector initial_weight(const ExperimentConfig& cfg) {
  if (cfg.w_init) return WeightVector{*cfg.w_init};
  if (cfg.w_init_random) return random_weight(cfg.maps.size(), cfg.seed);
  return barycenter(cfg.maps.size());
}

inline SlesConfig sles_config(const ExperimentConfig& cfg, PlannerMode mode, double d_prime) {
  SlesConfig s;
  s.mode = mode == PlannerMode::asles ? SamplingMode::adaptive : SamplingMode::basic;
  s.d = cfg.d;
  s.d_prime = d_prime;
  s.w_init = initial_weight(cfg);
  s.rho = cfg.rho;
  s.edge_length = cfg.edge_length;
  return s;
}

/// scala runs the naive baseline on the lattice basic SLES would cover.
inline MoesOutcome run_moes(const Experiment& ex, PlannerMode mode, std::optional<double> d_prime = std::nullopt) {
  const auto& cfg = ex.config;
  const std::size_t m = ex.maps.size();
  if (m != 2 && m != 3) throw ConfigError("maps", "moes needs 2 or 3 maps");
  MapFamily family(ex.maps, ex.basis);
  MoesOutcome out;
  out.mode = mode;
  out.d_prime = d_prime.value_or(cfg.d_prime);
  const SlesConfig scfg = sles_config(cfg, mode, out.d_prime);
  out.w_init = *scfg.w_init;
  std::vector<SolutionRecord> records;
  if (mode == PlannerMode::scala) {
    const auto lattice = sles_lattice(family, scfg);
    std::vector<WeightVector> weights;
    for (const auto& entry : lattice) weights.push_back(entry.second);
    records = naive_scalarization(family, ex.problem, cfg.optimizer, weights);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].key = lattice[i].first;
  } else {
    out.sles = sles(family, ex.problem, cfg.optimizer, scfg);
    records = out.sles->records;
  }
  out.archive = make_archive(std::move(records), cfg.reference.value_or(std::vector<double>{}));
  out.hypervolume = out.archive.hypervolume(&out.hv_report);
  return out;
}

inline void write_moes(const fs::path& dir, const Experiment& ex, const MoesOutcome& r) {
  const auto& cfg = ex.config;
  const auto& recs = r.archive.records;
  const std::size_t m = ex.maps.size();
  const long total = total_iterations(recs);

  {
    auto out = open_output(dir / "solutions.jsonl");
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& s = recs[i];
      json j{{"episode", i},
             {"weight", s.weight.w},
             {"key", s.key},
             {"parent", s.parent ? json(*s.parent) : json(nullptr)},
             {"iterations", s.iterations},
             {"termination", to_string(s.reason)},
             {"initial_objective", s.initial_objective},
             {"final_objective", s.final_objective},
             {"ergodic", s.ergodic},
             {"nondominated", r.archive.is_nondominated(i)},
             {"controls", "controls.csv"}};
      out << j.dump() << '\n';
    }
  }
  {
    auto out = open_output(dir / "controls.csv");
    out << "episode,step";
    for (const auto& n : control_names(ex.problem.model)) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < recs.size(); ++i)
      for (std::size_t k = 0; k < recs[i].controls.steps; ++k) {
        out << i << ',' << k;
        for (int a = 0; a < recs[i].controls.dim; ++a) out << ',' << num(recs[i].controls.at(k, a));
        out << '\n';
      }
  }
  {
    auto out = open_output(dir / "front.csv");
    out << "episode";
    for (std::size_t j = 0; j < m; ++j) out << ",w" << j + 1;
    for (std::size_t j = 0; j < m; ++j) out << ",e" << j + 1;
    out << ",nondominated\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
      out << i;
      for (double w : recs[i].weight.w) out << ',' << num(w);
      for (double e : recs[i].ergodic) out << ',' << num(e);
      out << ',' << (r.archive.is_nondominated(i) ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open_output(dir / "iterations.csv");
    out << "episode,iterations,cumulative\n";
    long cum = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      cum += recs[i].iterations;
      out << i << ',' << recs[i].iterations << ',' << cum << '\n';
    }
  }
  {
    auto out = open_output(dir / "trace.csv");
    write_trace_header(out);
    for (std::size_t i = 0; i < recs.size(); ++i) write_trace_rows(out, i, recs[i].trace);
  }
  write_json(dir / "hypervolume.json", {{"hypervolume", r.hypervolume},
                                        {"reference", r.archive.reference},
                                        {"front_size", r.archive.nondominated.size()},
                                        {"points_used", r.hv_report.used},
                                        {"points_clipped", r.hv_report.clipped},
                                        {"episodes", recs.size()},
                                        {"total_iterations", total}});

  MapFamily family(ex.maps, ex.basis);
  json manifest{{"command", "moes"},
                {"mode", to_string(r.mode)},
                {"maps", m},
                {"d", cfg.d},
                {"d_prime", r.d_prime},
                {"w_init", r.w_init.w},
                {"rho", cfg.rho ? json(*cfg.rho) : json(nullptr)},
                {"edge_length", to_string(cfg.edge_length)},
                {"seed", cfg.seed},
                {"k_max", cfg.k_max},
                {"steps", cfg.steps},
                {"epsilon", cfg.optimizer.epsilon},
                {"max_iters", cfg.optimizer.max_iters},
                {"map_distances", family.distances()},
                {"episodes", recs.size()},
                {"total_iterations", total},
                {"hypervolume", r.hypervolume},
                {"files", {"solutions.jsonl", "controls.csv", "front.csv", "hypervolume.json", "iterations.csv", "trace.csv"}}};
  if (r.sles) {
    manifest["sampling"] = to_string(r.sles->mode_used);
    manifest["fell_back"] = r.sles->fell_back;
    if (r.sles->space) {
      json corners = json::array();
      for (const auto& c : r.sles->space->corners()) corners.push_back({c[0], c[1]});
      manifest["affine_corners"] = corners;
      manifest["affine_degenerate"] = r.sles->space->degenerate();
    }
  } else {
    manifest["sampling"] = "basic";
    manifest["fell_back"] = false;
  }
  write_json(dir / "manifest.json", manifest);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  double d_prime = 0.0;
  std::optional<double> hypervolume;
  std::size_t episodes = 0;
  long total_iterations = 0;
  std::string status = "ok";
};

/// Step sizes: the explicit list, else scales times the distance between maps 1 and 2.
inline std::vector<double> sweep_steps(const Experiment& ex) {
  const auto& cfg = ex.config;
  std::vector<double> steps = cfg.d_prime_list;
  if (steps.empty() && !cfg.d_prime_scales.empty()) {
    if (ex.maps.size() < 2) throw ConfigError("maps", "sweep needs at least 2 maps");
    MapFamily family(ex.maps, ex.basis);
    double d12 = family.distance(0, 1);
    if (cfg.edge_length == EdgeLength::sqrt_metric) d12 = std::sqrt(d12);
    for (double s : cfg.d_prime_scales) steps.push_back(s * d12);
  }
  if (steps.size() < 2) throw ConfigError("planner.d_prime_list", "sweep needs at least 2 step sizes");
  return steps;
}

/// One adaptive run per step size; a failing run is recorded and the sweep continues.
inline std::vector<SweepRow> run_sweep(const Experiment& ex, const fs::path* dir = nullptr) {
  std::vector<SweepRow> rows;
  const auto steps = sweep_steps(ex);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    SweepRow row;
    row.d_prime = steps[i];
    try {
      const MoesOutcome r = run_moes(ex, PlannerMode::asles, steps[i]);
      row.hypervolume = r.hypervolume;
      row.episodes = r.archive.records.size();
      row.total_iterations = total_iterations(r.archive.records);
      if (dir) write_moes(*dir / ("run_" + std::to_string(i)), ex, r);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      log_warning("sweep: d' = " + num(steps[i]) + " failed: " + e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "d_prime,hypervolume,episodes,total_iterations,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    out << num(r.d_prime) << ',' << (r.hypervolume ? num(*r.hypervolume) : std::string()) << ',' << r.episodes << ','
        << r.total_iterations << ',' << status << '\n';
  }
}

// ---------------------------------------------------------------------------
// hv and dist
// ---------------------------------------------------------------------------

/// Objective vectors from a front CSV. Columns named e1, e2, ... are used when
/// present (the moes front.csv layout); otherwise every column is an objective.
/// Rows flagged nondominated = 0 are still read; dominated points do not change
/// the hypervolume.
inline std::vector<std::vector<double>> read_front_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(name + ": empty file");
  const auto header = split_csv_line(line);
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c].size() >= 2 && header[c][0] == 'e' && std::isdigit(static_cast<unsigned char>(header[c][1])))
      cols.push_back(c);
  std::vector<std::vector<double>> front;
  std::size_t row = 1;
  auto add = [&](const std::vector<std::string>& cells) {
    std::vector<double> p;
    if (cols.empty()) {
      for (const auto& c : cells) p.push_back(parse_double(c, name + " line " + std::to_string(row)));
    } else {
      for (std::size_t c : cols) {
        if (c >= cells.size()) throw std::invalid_argument(name + " line " + std::to_string(row) + ": missing column");
        p.push_back(parse_double(cells[c], name + " line " + std::to_string(row)));
      }
    }
    front.push_back(std::move(p));
  };
  if (cols.empty()) {
    // No e-columns: the first line is data unless it fails to parse.
    bool numeric = true;
    for (const auto& c : header) {
      try {
        parse_double(c, name);
      } catch (const std::invalid_argument&) {
        numeric = false;
      }
    }
    if (numeric) add(header);
  }
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    add(split_csv_line(line));
  }
  if (!front.empty()) {
    for (const auto& p : front)
      if (p.size() != front.front().size()) throw std::invalid_argument(name + ": rows differ in length");
  }
  return front;
}

inline std::vector<std::vector<double>> read_front_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_front_csv(in, path.string());
}

inline json run_hv(const std::vector<std::vector<double>>& points, std::vector<double> reference) {
  if (points.empty()) {
    log_warning("hypervolume: empty front");
    return {{"hypervolume", 0.0}, {"reference", reference}, {"front_size", 0}, {"points_used", 0}, {"points_clipped", 0}};
  }
  if (reference.empty()) reference.assign(points.front().size(), 1.0);
  const auto nd = pareto_filter(points);
  std::vector<std::vector<double>> front;
  for (std::size_t i : nd) front.push_back(points[i]);
  HypervolumeReport rep;
  const double hv = hypervolume(front, reference, &rep);
  return {{"hypervolume", hv},
          {"reference", reference},
          {"front_size", front.size()},
          {"points_used", rep.used},
          {"points_clipped", rep.clipped}};
}

inline void write_distance_csv(std::ostream& out, const Experiment& ex) {
  std::vector<CoeffTable> tables;
  for (const auto& m : ex.maps) tables.push_back(m.coeffs);
  const auto table = distance_table(tables, ex.basis);
  const std::size_t m = ex.maps.size();
  out << "i,j,metric,sqrt_metric\n";
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out << i + 1 << ',' << j + 1 << ',' << num(table[i * m + j]) << ',' << num(std::sqrt(table[i * m + j])) << '\n';
}

}  // namespace moes
