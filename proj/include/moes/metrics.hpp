#pragma once

// Multi-objective evaluation: dominance (minimization), Pareto filtering,
// hypervolume for two and three objectives, and inter-map distances.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "moes/fourier.hpp"
#include "moes/log.hpp"

namespace moes {

/// True iff a is no worse than b everywhere and strictly better somewhere.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dominates: vectors differ in length");
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > b[j]) return false;
    if (a[j] < b[j]) strict = true;
  }
  return strict;
}

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  return dominates(std::span<const double>(a), std::span<const double>(b));
}

/// Indices (ascending) of the vectors that no other vector dominates.
inline std::vector<std::size_t> pareto_filter(std::span<const std::vector<double>> vectors) {
  std::vector<std::size_t> order(vectors.size());
  std::iota(order.begin(), order.end(), 0);
  // Lexicographic order: a vector can only be dominated by one sorted before it.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vectors[a] < vectors[b]; });
  std::vector<std::size_t> front;
  for (std::size_t idx : order) {
    bool dominated = false;
    for (std::size_t f : front) {
      if (dominates(vectors[f], vectors[idx])) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(idx);
  }
  std::sort(front.begin(), front.end());
  return front;
}

inline std::vector<std::size_t> pareto_filter(const std::vector<std::vector<double>>& vectors) {
  return pareto_filter(std::span<const std::vector<double>>(vectors));
}

namespace detail {

// Area dominated by 2-D points (all strictly inside the reference box).
inline double hypervolume_2d(std::vector<std::array<double, 2>> pts, double rx, double ry) {
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double level = ry;
  for (const auto& p : pts) {
    if (p[1] < level) {
      area += (rx - p[0]) * (level - p[1]);
      level = p[1];
    }
  }
  return area;
}

}  // namespace detail

struct HypervolumeReport {
  std::size_t used = 0;
  std::size_t clipped = 0;  // points not strictly below the reference point
};

/// Lebesgue measure of the union of boxes [p, ref] over the front, for 1 to 3
/// objectives. Points that do not lie strictly below `ref` in every component
/// contribute nothing and are dropped with a warning.
inline double hypervolume(std::span<const std::vector<double>> front, std::span<const double> ref,
                          HypervolumeReport* report = nullptr) {
  const std::size_t m = ref.size();
  if (m < 1 || m > 3) throw std::invalid_argument("hypervolume: only 1 to 3 objectives are supported");
  std::vector<std::vector<double>> pts;
  std::size_t clipped = 0;
  for (const auto& p : front) {
    if (p.size() != m) throw std::invalid_argument("hypervolume: point and reference differ in length");
    bool inside = true;
    for (std::size_t j = 0; j < m; ++j) inside = inside && p[j] < ref[j];
    if (inside)
      pts.push_back(p);
    else
      ++clipped;
  }
  if (report) *report = {pts.size(), clipped};
  if (clipped > 0)
    log_warning("hypervolume: " + std::to_string(clipped) + " point(s) beyond the reference point were ignored");
  if (front.empty()) log_warning("hypervolume: empty front");
  if (pts.empty()) return 0.0;

  if (m == 1) {
    double best = ref[0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  if (m == 2) {
    std::vector<std::array<double, 2>> flat;
    for (const auto& p : pts) flat.push_back({p[0], p[1]});
    return detail::hypervolume_2d(std::move(flat), ref[0], ref[1]);
  }

  // Three objectives: slice along the third axis; each slab is a 2-D problem.
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a[2] < b[2]; });
  double volume = 0.0;
  std::vector<std::array<double, 2>> active;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    active.push_back({pts[i][0], pts[i][1]});
    const double top = (i + 1 < pts.size()) ? pts[i + 1][2] : ref[2];
    const double thickness = top - pts[i][2];
    if (thickness > 0.0) volume += thickness * detail::hypervolume_2d(active, ref[0], ref[1]);
  }
  return volume;
}

inline double hypervolume(const std::vector<std::vector<double>>& front, const std::vector<double>& ref,
                          HypervolumeReport* report = nullptr) {
  return hypervolume(std::span<const std::vector<double>>(front), std::span<const double>(ref), report);
}

/// sum_k lambda_k (phi_i,k - phi_j,k)^2 between two maps on one basis.
inline double map_distance(const CoeffTable& a, const CoeffTable& b, const SpectralBasis& basis) {
  return weighted_sq_distance(a, b, basis);
}

/// Symmetric table of map_distance over all pairs, row-major m x m.
inline std::vector<double> distance_table(std::span<const CoeffTable> maps, const SpectralBasis& basis) {
  const std::size_t m = maps.size();
  std::vector<double> table(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) table[i * m + j] = table[j * m + i] = map_distance(maps[i], maps[j], basis);
  return table;
}

}  // namespace moes
