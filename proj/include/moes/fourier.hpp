#pragma once

// Cosine-basis spectral machinery on a box workspace [0,L_1] x ... x [0,L_nu].
//
// Basis functions are F_k(x) = (1/h_k) prod_j cos(k_j pi x_j / L_j) with h_k
// chosen so that every F_k has unit L2 norm over the box. Index sets are full
// tensor products 0 <= k_j <= k_max, flattened row-major (last axis fastest).

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace moes {

/// Identity of a basis: two coefficient tables are comparable iff their shapes match.
struct BasisShape {
  int dims = 0;
  int k_max = 0;
  std::vector<double> lengths;

  bool operator==(const BasisShape&) const = default;
};

/// Coefficients of some function on the basis, tagged with the basis shape.
struct CoeffTable {
  BasisShape shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
};

/// Time-averaged statistics of a sampled trajectory, expressed on the basis.
struct TrajectoryCoefficients {
  CoeffTable coeffs;
  double horizon = 0.0;
  std::size_t samples = 0;
};

class SpectralBasis {
 public:
  SpectralBasis(int dims, std::vector<double> lengths, int k_max)
      : shape_{dims, k_max, std::move(lengths)} {
    if (dims < 1) throw std::invalid_argument("SpectralBasis: dimension must be >= 1");
    if (static_cast<int>(shape_.lengths.size()) != dims)
      throw std::invalid_argument("SpectralBasis: expected one length per dimension");
    for (double l : shape_.lengths)
      if (!(l > 0.0) || !std::isfinite(l))
        throw std::invalid_argument("SpectralBasis: lengths must be positive");
    if (k_max < 0) throw std::invalid_argument("SpectralBasis: k_max must be >= 0");

    const std::size_t per_axis = axis_count();
    std::size_t count = 1;
    for (int j = 0; j < dims; ++j) count *= per_axis;

    indices_.resize(count * dims);
    lambda_.resize(count);
    h_.resize(count);
    const double exponent = -0.5 * (dims + 1);
    for (std::size_t flat = 0; flat < count; ++flat) {
      std::size_t rem = flat;
      double norm_sq = 0.0;
      double h_sq = 1.0;
      for (int j = dims - 1; j >= 0; --j) {
        const int k = static_cast<int>(rem % per_axis);
        rem /= per_axis;
        indices_[flat * dims + j] = k;
        norm_sq += static_cast<double>(k) * k;
        h_sq *= (k == 0) ? shape_.lengths[j] : 0.5 * shape_.lengths[j];
      }
      lambda_[flat] = std::pow(1.0 + norm_sq, exponent);
      h_[flat] = std::sqrt(h_sq);
    }
  }

  int dims() const { return shape_.dims; }
  int k_max() const { return shape_.k_max; }
  const std::vector<double>& lengths() const { return shape_.lengths; }
  const BasisShape& shape() const { return shape_; }
  std::size_t size() const { return lambda_.size(); }
  std::size_t axis_count() const { return static_cast<std::size_t>(shape_.k_max) + 1; }

  std::span<const int> index(std::size_t flat) const {
    return {indices_.data() + flat * shape_.dims, static_cast<std::size_t>(shape_.dims)};
  }
  std::size_t flat_index(std::span<const int> k) const {
    if (static_cast<int>(k.size()) != shape_.dims)
      throw std::invalid_argument("SpectralBasis: index has wrong dimension");
    std::size_t flat = 0;
    for (int j = 0; j < shape_.dims; ++j) {
      if (k[j] < 0 || k[j] > shape_.k_max) throw std::out_of_range("SpectralBasis: index out of range");
      flat = flat * axis_count() + static_cast<std::size_t>(k[j]);
    }
    return flat;
  }
  std::size_t flat_index(std::initializer_list<int> k) const {
    return flat_index(std::span<const int>(k.begin(), k.size()));
  }

  double lambda(std::size_t flat) const { return lambda_[flat]; }
  double h(std::size_t flat) const { return h_[flat]; }
  std::span<const double> lambdas() const { return lambda_; }

  CoeffTable zeros() const { return CoeffTable{shape_, std::vector<double>(size(), 0.0)}; }

  bool operator==(const SpectralBasis& other) const { return shape_ == other.shape_; }

 private:
  BasisShape shape_;
  std::vector<int> indices_;
  std::vector<double> lambda_;
  std::vector<double> h_;
};

/// Scratch space for evaluating basis functions; one per thread.
class BasisEvaluator {
 public:
  explicit BasisEvaluator(const SpectralBasis& basis)
      : basis_(&basis),
        cos_(basis.dims() * basis.axis_count()),
        dcos_(basis.dims() * basis.axis_count()) {}

  /// Writes F_k(x) for every k into `out`.
  void values(std::span<const double> x, std::span<double> out) {
    fill(x, false);
    const int dims = basis_->dims();
    const std::size_t stride = basis_->axis_count();
    for (std::size_t flat = 0; flat < basis_->size(); ++flat) {
      const auto k = basis_->index(flat);
      double v = 1.0 / basis_->h(flat);
      for (int j = 0; j < dims; ++j) v *= cos_[j * stride + k[j]];
      out[flat] = v;
    }
  }

  /// Writes grad F_k(x) for every k into `out` (size() x dims, row-major).
  void gradients(std::span<const double> x, std::span<double> out) {
    fill(x, true);
    const int dims = basis_->dims();
    const std::size_t stride = basis_->axis_count();
    for (std::size_t flat = 0; flat < basis_->size(); ++flat) {
      const auto k = basis_->index(flat);
      const double scale = 1.0 / basis_->h(flat);
      for (int j = 0; j < dims; ++j) {
        double v = scale * dcos_[j * stride + k[j]];
        for (int l = 0; l < dims; ++l)
          if (l != j) v *= cos_[l * stride + k[l]];
        out[flat * dims + j] = v;
      }
    }
  }

  /// Accumulates sum_k weight_k * grad F_k(x) into `grad` (length dims).
  void accumulate_gradient(std::span<const double> x, std::span<const double> weight,
                           std::span<double> grad) {
    fill(x, true);
    const int dims = basis_->dims();
    const std::size_t stride = basis_->axis_count();
    for (std::size_t flat = 0; flat < basis_->size(); ++flat) {
      if (weight[flat] == 0.0) continue;
      const auto k = basis_->index(flat);
      const double scale = weight[flat] / basis_->h(flat);
      for (int j = 0; j < dims; ++j) {
        if (k[j] == 0) continue;
        double v = scale * dcos_[j * stride + k[j]];
        for (int l = 0; l < dims; ++l)
          if (l != j) v *= cos_[l * stride + k[l]];
        grad[j] += v;
      }
    }
  }

 private:
  void fill(std::span<const double> x, bool with_derivative) {
    const std::size_t stride = basis_->axis_count();
    for (int j = 0; j < basis_->dims(); ++j) {
      const double omega = std::numbers::pi / basis_->lengths()[j];
      for (int k = 0; k <= basis_->k_max(); ++k) {
        const double arg = k * omega * x[j];
        cos_[j * stride + k] = std::cos(arg);
        if (with_derivative) dcos_[j * stride + k] = -k * omega * std::sin(arg);
      }
    }
  }

  const SpectralBasis* basis_;
  std::vector<double> cos_;
  std::vector<double> dcos_;
};

inline SpectralBasis build_basis(int dims, std::vector<double> lengths, int k_max) {
  return SpectralBasis(dims, std::move(lengths), k_max);
}

/// Single-point evaluation of one basis function; convenient, not fast.
inline double basis_function(const SpectralBasis& basis, std::size_t flat, std::span<const double> x) {
  const auto k = basis.index(flat);
  double v = 1.0 / basis.h(flat);
  for (int j = 0; j < basis.dims(); ++j)
    v *= std::cos(k[j] * std::numbers::pi * x[j] / basis.lengths()[j]);
  return v;
}

// ---------------------------------------------------------------------------
// Gridded densities and info maps
// ---------------------------------------------------------------------------

/// Density sampled at the cell midpoints of a regular grid over the box.
/// Flattened row-major, last axis fastest.
struct GridDensity {
  std::vector<int> cells;
  std::vector<double> lengths;
  std::vector<double> values;

  int dims() const { return static_cast<int>(cells.size()); }
  double spacing(int axis) const { return lengths[axis] / cells[axis]; }
  double cell_volume() const {
    double v = 1.0;
    for (int j = 0; j < dims(); ++j) v *= spacing(j);
    return v;
  }
  std::size_t cell_count() const {
    return std::accumulate(cells.begin(), cells.end(), std::size_t{1},
                           [](std::size_t a, int c) { return a * static_cast<std::size_t>(c); });
  }
  void cell_center(std::size_t flat, std::span<double> x) const {
    for (int j = dims() - 1; j >= 0; --j) {
      const std::size_t c = flat % static_cast<std::size_t>(cells[j]);
      flat /= static_cast<std::size_t>(cells[j]);
      x[j] = (static_cast<double>(c) + 0.5) * spacing(j);
    }
  }
  double mass() const {
    return std::accumulate(values.begin(), values.end(), 0.0) * cell_volume();
  }
};

inline void validate_grid(const GridDensity& grid) {
  if (grid.cells.empty()) throw std::invalid_argument("grid: no dimensions");
  if (grid.lengths.size() != grid.cells.size())
    throw std::invalid_argument("grid: lengths and cell counts disagree in dimension");
  for (int c : grid.cells)
    if (c < 1) throw std::invalid_argument("grid: cell counts must be positive");
  for (double l : grid.lengths)
    if (!(l > 0.0)) throw std::invalid_argument("grid: lengths must be positive");
  if (grid.values.size() != grid.cell_count())
    throw std::invalid_argument("grid: value count does not match cell counts");
  for (double v : grid.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("grid: values must be finite and >= 0");
}

/// Rescales the grid to unit mass. Throws on an all-zero grid.
inline GridDensity normalize_density(GridDensity grid) {
  validate_grid(grid);
  const double mass = grid.mass();
  if (!(mass > 0.0)) throw std::invalid_argument("grid: total mass is zero; cannot normalize");
  for (double& v : grid.values) v /= mass;
  return grid;
}

struct InfoMap {
  GridDensity grid;
  CoeffTable coeffs;
};

/// phi_k = integral of phi(x) F_k(x) over the box, by the midpoint rule on the storage grid.
inline CoeffTable map_coefficients(const GridDensity& grid, const SpectralBasis& basis) {
  validate_grid(grid);
  if (grid.dims() != basis.dims()) throw std::invalid_argument("map_coefficients: dimension mismatch");
  for (int j = 0; j < grid.dims(); ++j) {
    if (std::abs(grid.lengths[j] - basis.lengths()[j]) > 1e-12 * basis.lengths()[j])
      throw std::invalid_argument("map_coefficients: grid and basis cover different boxes");
    if (grid.cells[j] < 2 * (basis.k_max() + 1))
      throw std::invalid_argument("map_coefficients: grid under-resolved for k_max (need >= " +
                                  std::to_string(2 * (basis.k_max() + 1)) + " cells per axis)");
  }
  if (std::abs(grid.mass() - 1.0) > 1e-9)
    throw std::invalid_argument("map_coefficients: grid is not a normalized density");

  CoeffTable out = basis.zeros();
  BasisEvaluator eval(basis);
  std::vector<double> x(grid.dims());
  std::vector<double> f(basis.size());
  const double vol = grid.cell_volume();
  for (std::size_t c = 0; c < grid.values.size(); ++c) {
    const double w = grid.values[c];
    if (w == 0.0) continue;
    grid.cell_center(c, x);
    eval.values(x, f);
    for (std::size_t k = 0; k < f.size(); ++k) out.values[k] += w * f[k];
  }
  for (double& v : out.values) v *= vol;
  return out;
}

inline InfoMap make_info_map(GridDensity grid, const SpectralBasis& basis) {
  CoeffTable coeffs = map_coefficients(grid, basis);
  return InfoMap{std::move(grid), std::move(coeffs)};
}

/// c_k = (1/N) sum_i F_k(q(t_i)) over uniformly spaced samples.
/// `points` holds N samples of `basis.dims()` coordinates each.
inline TrajectoryCoefficients trajectory_coefficients(std::span<const double> points,
                                                      const SpectralBasis& basis, double dt = 1.0) {
  const std::size_t dims = static_cast<std::size_t>(basis.dims());
  if (points.empty()) throw std::invalid_argument("trajectory_coefficients: no samples");
  if (points.size() % dims != 0)
    throw std::invalid_argument("trajectory_coefficients: sample array is not a multiple of dims");
  const std::size_t n = points.size() / dims;

  TrajectoryCoefficients out{basis.zeros(), dt * static_cast<double>(n), n};
  BasisEvaluator eval(basis);
  std::vector<double> f(basis.size());
  for (std::size_t i = 0; i < n; ++i) {
    eval.values(points.subspan(i * dims, dims), f);
    for (std::size_t k = 0; k < f.size(); ++k) out.coeffs.values[k] += f[k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : out.coeffs.values) v *= inv_n;
  return out;
}

inline void require_shape(const CoeffTable& table, const SpectralBasis& basis, const char* what) {
  if (!(table.shape == basis.shape()) || table.size() != basis.size())
    throw std::invalid_argument(std::string(what) + ": coefficient table does not match basis");
}

/// sum_k lambda_k (a_k - b_k)^2 for two tables on the same basis.
inline double weighted_sq_distance(const CoeffTable& a, const CoeffTable& b, const SpectralBasis& basis) {
  require_shape(a, basis, "weighted_sq_distance");
  require_shape(b, basis, "weighted_sq_distance");
  double sum = 0.0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double d = a[k] - b[k];
    sum += basis.lambda(k) * d * d;
  }
  return sum;
}

inline double ergodic_metric(const CoeffTable& c, const CoeffTable& phi, const SpectralBasis& basis) {
  return weighted_sq_distance(c, phi, basis);
}

inline double ergodic_metric(const TrajectoryCoefficients& c, const CoeffTable& phi,
                             const SpectralBasis& basis) {
  return weighted_sq_distance(c.coeffs, phi, basis);
}

}  // namespace moes
