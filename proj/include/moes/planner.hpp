#pragma once

// Multi-objective layer: the weight simplex, scalarization of map families,
// basic and adaptive neighbour sampling, the sequential local ergodic search
// (breadth-first weight-space coverage with warm starts) and the naive
// scalarization baseline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "moes/dynamics.hpp"
#include "moes/ergopt.hpp"
#include "moes/fourier.hpp"
#include "moes/log.hpp"
#include "moes/metrics.hpp"

namespace moes {

// Weight components at or below this are treated as leaving the open simplex.
inline constexpr double kWeightTolerance = 1e-9;
// Floor applied when a point on the boundary of the transformed simplex is
// mapped back to a weight vector.
inline constexpr double kWeightClip = 1e-6;

struct WeightVector {
  std::vector<double> w;

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }
  bool operator==(const WeightVector&) const = default;
};

inline void validate_weight(const WeightVector& w) {
  if (w.w.empty()) throw std::invalid_argument("weight: empty vector");
  double sum = 0.0;
  for (double x : w.w) {
    if (!(x > 0.0)) throw std::invalid_argument("weight: components must be strictly positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("weight: components must sum to 1");
}

inline WeightVector barycenter(std::size_t m) { return WeightVector{std::vector<double>(m, 1.0 / static_cast<double>(m))}; }

/// Unit preference for map i, pulled into the open simplex by the clip floor.
inline WeightVector corner_weight(std::size_t m, std::size_t i) {
  WeightVector w{std::vector<double>(m, kWeightClip)};
  w.w[i] = 1.0 - kWeightClip * static_cast<double>(m - 1);
  return w;
}

/// Integer offsets of a sample from the initial weight along the sampling axes.
using LatticeKey = std::vector<int>;

inline int lattice_radius(const LatticeKey& key) {
  int r = 0;
  for (int k : key) r += std::abs(k);
  return r;
}

// ---------------------------------------------------------------------------
// Map families and scalarization
// ---------------------------------------------------------------------------

class MapFamily {
 public:
  MapFamily(std::vector<InfoMap> maps, const SpectralBasis& basis) : maps_(std::move(maps)), shape_(basis.shape()) {
    if (maps_.empty()) throw std::invalid_argument("map family: no maps");
    std::vector<CoeffTable> tables;
    for (const auto& m : maps_) {
      require_shape(m.coeffs, basis, "map family");
      tables.push_back(m.coeffs);
    }
    distances_ = distance_table(tables, basis);
  }

  std::size_t size() const { return maps_.size(); }
  const InfoMap& map(std::size_t i) const { return maps_[i]; }
  const CoeffTable& coeffs(std::size_t i) const { return maps_[i].coeffs; }
  const BasisShape& shape() const { return shape_; }
  /// Ergodic distance E^(i,j) between maps i and j.
  double distance(std::size_t i, std::size_t j) const { return distances_[i * size() + j]; }
  const std::vector<double>& distances() const { return distances_; }

 private:
  std::vector<InfoMap> maps_;
  BasisShape shape_;
  std::vector<double> distances_;
};

/// phi'_k = w . (phi^(1)_k, ..., phi^(m)_k).
inline CoeffTable scalarize(const MapFamily& family, const WeightVector& w) {
  if (w.size() != family.size()) throw std::invalid_argument("scalarize: weight length differs from family size");
  CoeffTable out{family.shape(), std::vector<double>(family.coeffs(0).size(), 0.0)};
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& phi = family.coeffs(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w[i] * phi[k];
  }
  return out;
}

/// Ergodic metric of the trajectory's samples q(t_1)..q(t_N) against every map of the family.
inline std::vector<double> ergodic_vector(const Trajectory& traj, const MapFamily& family,
                                          const SpectralBasis& basis) {
  if (traj.steps < 1) throw std::invalid_argument("ergodic_vector: trajectory has no samples");
  const auto c = trajectory_coefficients(traj.positions(1, traj.steps), basis);
  std::vector<double> out(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) out[i] = ergodic_metric(c, family.coeffs(i), basis);
  return out;
}

// ---------------------------------------------------------------------------
// Basic sampling in the weight simplex
// ---------------------------------------------------------------------------

namespace detail {

inline void require_supported_m(std::size_t m, const char* what) {
  if (m != 2 && m != 3) throw std::invalid_argument(std::string(what) + ": only 2 or 3 objectives are supported");
}

// Offsets in the order (0,+1), (0,-1), (+1,0), (-1,0) for two chart axes; (+1), (-1) for one.
inline std::vector<LatticeKey> lattice_offsets(std::size_t chart_dims) {
  if (chart_dims == 1) return {{1}, {-1}};
  return {{0, 1}, {0, -1}, {1, 0}, {-1, 0}};
}

// Weight from simplex chart coordinates (w1) or (w1, w2); nullopt if it leaves the open simplex.
inline std::optional<WeightVector> weight_from_chart(std::span<const double> chart) {
  WeightVector w;
  double rest = 1.0;
  for (double c : chart) {
    w.w.push_back(c);
    rest -= c;
  }
  w.w.push_back(rest);
  for (double x : w.w)
    if (x <= kWeightTolerance) return std::nullopt;
  return w;
}

}  // namespace detail

/// Neighbours at distance d along the simplex chart axes. For m = 2 the chart
/// is w1 (w2 implied); for m = 3 it is (w1, w2) with w3 implied. Candidates
/// leaving the open simplex are dropped.
inline std::vector<WeightVector> basic_neighbors(const WeightVector& w, double d) {
  const std::size_t m = w.size();
  detail::require_supported_m(m, "basic_neighbors");
  if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("basic_neighbors: step must lie in (0,1)");
  std::vector<WeightVector> out;
  for (const auto& off : detail::lattice_offsets(m - 1)) {
    std::vector<double> chart(w.w.begin(), w.w.end() - 1);
    for (std::size_t a = 0; a < chart.size(); ++a) chart[a] += off[a] * d;
    if (auto nw = detail::weight_from_chart(chart)) out.push_back(std::move(*nw));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Affine-transformed weight space
// ---------------------------------------------------------------------------

/// How pairwise map distances become edge lengths of the transformed simplex.
enum class EdgeLength { sqrt_metric, metric };

inline std::string to_string(EdgeLength e) { return e == EdgeLength::sqrt_metric ? "sqrt" : "metric"; }

inline EdgeLength edge_length_from_string(const std::string& s) {
  if (s == "sqrt") return EdgeLength::sqrt_metric;
  if (s == "metric") return EdgeLength::metric;
  throw std::invalid_argument("unknown edge length rule '" + s + "' (expected 'sqrt' or 'metric')");
}

/// Simplex whose corner i stands for map i and whose edge (i,j) has the
/// length of the distance between maps i and j. Points are given in a chart
/// with corner 1 at the origin and corner 2 on the first axis; the affine map
/// to weights is the barycentric-coordinate map.
class AffineWeightSpace {
 public:
  static constexpr double kDegenerateVolume = 1e-9;

  /// `edges` is a symmetric m x m table of edge lengths, row-major.
  AffineWeightSpace(std::size_t m, std::span<const double> edges) : m_(m) {
    detail::require_supported_m(m, "affine weight space");
    if (edges.size() != m * m) throw std::invalid_argument("affine weight space: edge table must be m x m");
    for (double e : edges)
      if (!(e >= 0.0) || !std::isfinite(e)) throw std::invalid_argument("affine weight space: edge lengths must be >= 0");
    const double d12 = edges[0 * m + 1];
    if (m == 2) {
      corners_ = {{0.0, 0.0}, {d12, 0.0}};
      volume_ = d12;
    } else {
      const double d13 = edges[0 * m + 2];
      const double d23 = edges[1 * m + 2];
      const double longest = std::max({d12, d13, d23});
      const double slack = 1e-9 * std::max(1.0, longest);
      if (d12 > d13 + d23 + slack || d13 > d12 + d23 + slack || d23 > d12 + d13 + slack)
        throw std::invalid_argument("affine weight space: edge lengths violate the triangle inequality");
      double zx = 0.0;
      double zy = 0.0;
      if (d12 > 0.0) {
        zx = (d13 * d13 + d12 * d12 - d23 * d23) / (2.0 * d12);
        zy = std::sqrt(std::max(0.0, d13 * d13 - zx * zx));
      }
      corners_ = {{0.0, 0.0}, {d12, 0.0}, {zx, zy}};
      volume_ = 0.5 * d12 * zy;
    }
    degenerate_ = volume_ < kDegenerateVolume;
  }

  std::size_t objectives() const { return m_; }
  std::size_t chart_dims() const { return m_ - 1; }
  bool degenerate() const { return degenerate_; }
  double volume() const { return volume_; }
  const std::vector<std::array<double, 2>>& corners() const { return corners_; }

  /// Chart coordinates of a weight vector: sum_i w_i corner_i.
  std::vector<double> to_chart(const WeightVector& w) const {
    if (w.size() != m_) throw std::invalid_argument("affine weight space: weight length mismatch");
    std::vector<double> p(chart_dims(), 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t a = 0; a < chart_dims(); ++a) p[a] += w[i] * corners_[i][a];
    return p;
  }

  /// Barycentric coordinates of a chart point (may be negative outside).
  std::vector<double> barycentric(std::span<const double> p) const {
    require_nondegenerate();
    if (m_ == 2) {
      const double t = p[0] / corners_[1][0];
      return {1.0 - t, t};
    }
    const auto& b = corners_[1];
    const auto& c = corners_[2];
    const double det = b[0] * c[1] - b[1] * c[0];
    const double l2 = (p[0] * c[1] - p[1] * c[0]) / det;
    const double l3 = (b[0] * p[1] - b[1] * p[0]) / det;
    return {1.0 - l2 - l3, l2, l3};
  }

  /// Membership in the closed simplex, with a small relative tolerance.
  bool contains(std::span<const double> p) const {
    for (double l : barycentric(p))
      if (l < -1e-9) return false;
    return true;
  }

  /// Weight vector of a chart point inside the simplex. Components below the
  /// clip floor (points on the boundary) are raised to it and the vector is
  /// renormalized.
  WeightVector to_weight(std::span<const double> p) const {
    auto l = barycentric(p);
    double sum = 0.0;
    for (double& x : l) {
      x = std::max(x, kWeightClip);
      sum += x;
    }
    for (double& x : l) x /= sum;
    return WeightVector{std::move(l)};
  }

 private:
  void require_nondegenerate() const {
    if (degenerate_) throw std::logic_error("affine weight space is degenerate; use basic sampling instead");
  }

  std::size_t m_;
  std::vector<std::array<double, 2>> corners_;
  double volume_ = 0.0;
  bool degenerate_ = false;
};

/// Builds the transformed simplex from the family's pairwise ergodic distances.
inline AffineWeightSpace build_affine_space(const MapFamily& family, EdgeLength rule = EdgeLength::sqrt_metric) {
  std::vector<double> edges = family.distances();
  if (rule == EdgeLength::sqrt_metric)
    for (double& e : edges) e = std::sqrt(e);
  return AffineWeightSpace(family.size(), edges);
}

/// Neighbours of w at chart distance d' along the chart axes, kept only if
/// they stay inside the transformed simplex.
inline std::vector<WeightVector> adaptive_neighbors(const WeightVector& w, const AffineWeightSpace& space,
                                                    double d_prime) {
  if (space.degenerate()) throw std::logic_error("adaptive_neighbors: degenerate weight space");
  if (!(d_prime > 0.0)) throw std::invalid_argument("adaptive_neighbors: step must be positive");
  const auto p = space.to_chart(w);
  std::vector<WeightVector> out;
  for (const auto& off : detail::lattice_offsets(space.chart_dims())) {
    std::vector<double> q = p;
    for (std::size_t a = 0; a < q.size(); ++a) q[a] += off[a] * d_prime;
    if (space.contains(q)) out.push_back(space.to_weight(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lattices for breadth-first coverage
// ---------------------------------------------------------------------------

enum class SamplingMode { basic, adaptive };

inline std::string to_string(SamplingMode m) { return m == SamplingMode::basic ? "basic" : "adaptive"; }

/// Sample points p = origin + key * step in either the simplex chart (basic)
/// or the transformed chart (adaptive). Weights are always computed from the
/// integer key so membership tests are exact.
class WeightLattice {
 public:
  static WeightLattice basic(const WeightVector& origin, double d) {
    detail::require_supported_m(origin.size(), "basic lattice");
    validate_weight(origin);
    if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("basic lattice: step d must lie in (0,1)");
    WeightLattice l;
    l.mode_ = SamplingMode::basic;
    l.step_ = d;
    l.origin_.assign(origin.w.begin(), origin.w.end() - 1);
    return l;
  }

  static WeightLattice adaptive(const WeightVector& origin, const AffineWeightSpace& space, double d_prime) {
    validate_weight(origin);
    if (space.degenerate()) throw std::logic_error("adaptive lattice: degenerate weight space");
    if (!(d_prime > 0.0)) throw std::invalid_argument("adaptive lattice: step d' must be positive");
    WeightLattice l;
    l.mode_ = SamplingMode::adaptive;
    l.step_ = d_prime;
    l.space_ = space;
    l.origin_ = space.to_chart(origin);
    return l;
  }

  SamplingMode mode() const { return mode_; }
  double step() const { return step_; }
  std::size_t chart_dims() const { return origin_.size(); }
  const std::optional<AffineWeightSpace>& space() const { return space_; }

  std::vector<double> chart_point(const LatticeKey& key) const {
    std::vector<double> p = origin_;
    for (std::size_t a = 0; a < p.size(); ++a) p[a] += key[a] * step_;
    return p;
  }

  std::optional<WeightVector> weight_at(const LatticeKey& key) const {
    const auto p = chart_point(key);
    if (mode_ == SamplingMode::basic) return detail::weight_from_chart(p);
    if (!space_->contains(p)) return std::nullopt;
    return space_->to_weight(p);
  }

  std::vector<LatticeKey> neighbor_keys(const LatticeKey& key) const {
    std::vector<LatticeKey> out;
    for (const auto& off : detail::lattice_offsets(chart_dims())) {
      LatticeKey k = key;
      for (std::size_t a = 0; a < k.size(); ++a) k[a] += off[a];
      out.push_back(std::move(k));
    }
    return out;
  }

  LatticeKey origin_key() const { return LatticeKey(chart_dims(), 0); }

 private:
  SamplingMode mode_ = SamplingMode::basic;
  double step_ = 0.1;
  std::vector<double> origin_;
  std::optional<AffineWeightSpace> space_;
};

// ---------------------------------------------------------------------------
// Sequential local ergodic search
// ---------------------------------------------------------------------------

struct SlesConfig {
  SamplingMode mode = SamplingMode::basic;
  double d = 0.1;
  double d_prime = 0.05;
  std::optional<WeightVector> w_init;  // barycenter when unset
  std::optional<int> rho;              // early stop: lattice radius around w_init
  EdgeLength edge_length = EdgeLength::sqrt_metric;
};

struct SolutionRecord {
  WeightVector weight;
  LatticeKey key;
  ControlSequence controls;
  std::vector<double> ergodic;  // ergodic vector against every map
  int iterations = 0;
  Termination reason = Termination::iter_cap;
  double initial_objective = 0.0;  // scalarized metric of the initial guess
  double final_objective = 0.0;    // scalarized metric of the result
  std::optional<std::size_t> parent;  // record whose controls warm-started this one
  EpisodeTrace trace;
};

struct SlesResult {
  std::vector<SolutionRecord> records;  // in expansion order
  std::vector<LatticeKey> closed;       // in expansion order
  SamplingMode mode_used = SamplingMode::basic;
  bool fell_back = false;  // adaptive requested on a degenerate space
  std::optional<AffineWeightSpace> space;
  std::size_t open_remaining = 0;

  long total_iterations() const {
    long s = 0;
    for (const auto& r : records) s += r.iterations;
    return s;
  }
  std::vector<WeightVector> weights() const {
    std::vector<WeightVector> w;
    for (const auto& r : records) w.push_back(r.weight);
    return w;
  }
};

namespace detail {

inline WeightLattice make_lattice(const MapFamily& family, const SlesConfig& cfg, SlesResult& result) {
  require_supported_m(family.size(), "sles");
  const WeightVector w_init = cfg.w_init.value_or(barycenter(family.size()));
  if (w_init.size() != family.size()) throw std::invalid_argument("sles: w_init length differs from family size");
  if (cfg.mode == SamplingMode::adaptive) {
    AffineWeightSpace space = build_affine_space(family, cfg.edge_length);
    result.space = space;
    if (!space.degenerate()) {
      result.mode_used = SamplingMode::adaptive;
      return WeightLattice::adaptive(w_init, space, cfg.d_prime);
    }
    result.fell_back = true;
    log_warning("sles: transformed weight space is degenerate; falling back to basic sampling with d = " +
                std::to_string(cfg.d));
  }
  result.mode_used = SamplingMode::basic;
  return WeightLattice::basic(w_init, cfg.d);
}

struct OpenEntry {
  LatticeKey key;
  WeightVector weight;
  std::optional<std::size_t> parent;
};

}  // namespace detail

/// Breadth-first enumeration of the lattice the planner would visit, without
/// running any optimization. Returns (key, weight) pairs in expansion order.
inline std::vector<std::pair<LatticeKey, WeightVector>> enumerate_lattice(const WeightLattice& lattice,
                                                                          std::optional<int> rho = std::nullopt) {
  std::vector<std::pair<LatticeKey, WeightVector>> out;
  std::deque<LatticeKey> open{lattice.origin_key()};
  std::set<LatticeKey> seen{lattice.origin_key()};
  while (!open.empty()) {
    LatticeKey key = open.front();
    open.pop_front();
    out.emplace_back(key, *lattice.weight_at(key));
    for (auto& nk : lattice.neighbor_keys(key)) {
      if (rho && lattice_radius(nk) > *rho) continue;
      if (seen.count(nk) || !lattice.weight_at(nk)) continue;
      seen.insert(nk);
      open.push_back(std::move(nk));
    }
  }
  return out;
}

/// Sequential local ergodic search. Covers the weight lattice breadth-first
/// from w_init; every episode optimizes the scalarized map starting from the
/// controls of the episode that first generated its weight (zero controls for
/// the first episode).
inline SlesResult sles(const MapFamily& family, const ErgodicProblem& problem, const ErgOptConfig& opt,
                       const SlesConfig& cfg) {
  problem.validate();
  SlesResult result;
  const WeightLattice lattice = detail::make_lattice(family, cfg, result);
  if (cfg.rho && *cfg.rho < 0) throw std::invalid_argument("sles: rho must be >= 0");

  std::deque<detail::OpenEntry> open;
  std::set<LatticeKey> generated;  // OPEN and CLOSED
  const LatticeKey origin = lattice.origin_key();
  const auto w0 = lattice.weight_at(origin);
  if (!w0) throw std::invalid_argument("sles: w_init lies outside the weight space");
  open.push_back({origin, *w0, std::nullopt});
  generated.insert(origin);

  while (!open.empty()) {
    detail::OpenEntry entry = std::move(open.front());
    open.pop_front();

    const CoeffTable target = scalarize(family, entry.weight);
    const ControlSequence u_init = entry.parent ? result.records[*entry.parent].controls : problem.zero_controls();
    EpisodeResult ep = ergodic_search(target, u_init, problem, opt);

    SolutionRecord rec;
    rec.weight = entry.weight;
    rec.key = entry.key;
    rec.ergodic = ergodic_vector(rollout(problem.model, problem.start, ep.controls), family, problem.basis);
    rec.iterations = ep.trace.iterations;
    rec.reason = ep.trace.reason;
    rec.initial_objective = ep.trace.ergodic.front();
    rec.final_objective = ep.final_value.ergodic;
    rec.parent = entry.parent;
    rec.controls = std::move(ep.controls);
    rec.trace = std::move(ep.trace);
    result.closed.push_back(entry.key);
    result.records.push_back(std::move(rec));
    const std::size_t self = result.records.size() - 1;

    for (auto& nk : lattice.neighbor_keys(entry.key)) {
      if (cfg.rho && lattice_radius(nk) > *cfg.rho) continue;
      if (generated.count(nk)) continue;
      auto nw = lattice.weight_at(nk);
      if (!nw) continue;
      generated.insert(nk);
      open.push_back({std::move(nk), std::move(*nw), self});
    }
  }
  result.open_remaining = open.size();
  return result;
}

/// The lattice SLES would cover for this family and configuration.
inline std::vector<std::pair<LatticeKey, WeightVector>> sles_lattice(const MapFamily& family, const SlesConfig& cfg) {
  SlesResult scratch;
  ScopedLogSink quiet(nullptr);
  return enumerate_lattice(detail::make_lattice(family, cfg, scratch), cfg.rho);
}

/// Independent episodes from zero controls, one per weight, in input order.
inline std::vector<SolutionRecord> naive_scalarization(const MapFamily& family, const ErgodicProblem& problem,
                                                       const ErgOptConfig& opt,
                                                       std::span<const WeightVector> weights) {
  problem.validate();
  std::vector<SolutionRecord> out;
  out.reserve(weights.size());
  for (const auto& w : weights) {
    validate_weight(w);
    EpisodeResult ep = ergodic_search(scalarize(family, w), problem.zero_controls(), problem, opt);
    SolutionRecord rec;
    rec.weight = w;
    rec.ergodic = ergodic_vector(rollout(problem.model, problem.start, ep.controls), family, problem.basis);
    rec.iterations = ep.trace.iterations;
    rec.reason = ep.trace.reason;
    rec.initial_objective = ep.trace.ergodic.front();
    rec.final_objective = ep.final_value.ergodic;
    rec.controls = std::move(ep.controls);
    rec.trace = std::move(ep.trace);
    out.push_back(std::move(rec));
  }
  return out;
}

inline long total_iterations(std::span<const SolutionRecord> records) {
  long s = 0;
  for (const auto& r : records) s += r.iterations;
  return s;
}

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

struct ParetoArchive {
  std::vector<SolutionRecord> records;
  std::vector<std::size_t> nondominated;
  std::vector<double> reference;

  std::vector<std::vector<double>> front() const {
    std::vector<std::vector<double>> f;
    for (std::size_t i : nondominated) f.push_back(records[i].ergodic);
    return f;
  }
  double hypervolume(HypervolumeReport* report = nullptr) const { return moes::hypervolume(front(), reference, report); }
  bool is_nondominated(std::size_t i) const {
    return std::binary_search(nondominated.begin(), nondominated.end(), i);
  }
};

/// Default reference point is (1, ..., 1).
inline ParetoArchive make_archive(std::vector<SolutionRecord> records, std::vector<double> reference = {}) {
  ParetoArchive a;
  a.records = std::move(records);
  if (reference.empty() && !a.records.empty()) reference.assign(a.records.front().ergodic.size(), 1.0);
  a.reference = std::move(reference);
  std::vector<std::vector<double>> vecs;
  for (const auto& r : a.records) vecs.push_back(r.ergodic);
  a.nondominated = pareto_filter(vecs);
  return a;
}

}  // namespace moes
