#pragma once

// Info map sources: Gaussian mixtures (rasterized then renormalized) and
// CSV grids.
//
// CSV grid format: first line "rows,cols,L1,L2", then `rows` lines of `cols`
// comma-separated nonnegative values. Row r, column c is the cell centred at
// x1 = (r + 0.5) L1 / rows, x2 = (c + 0.5) L2 / cols. Values need not be
// normalized; they are rescaled to unit mass on load.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "moes/fourier.hpp"

namespace moes {

struct GaussianComponent {
  std::vector<double> mean;
  double sigma = 0.1;
  double weight = 1.0;
};

using GaussianMixture = std::vector<GaussianComponent>;

inline double mixture_density(const GaussianMixture& mix, std::span<const double> x) {
  double v = 0.0;
  for (const auto& g : mix) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - g.mean[j];
      r2 += d * d;
    }
    const double norm = std::pow(2.0 * std::numbers::pi * g.sigma * g.sigma, -0.5 * static_cast<double>(x.size()));
    v += g.weight * norm * std::exp(-0.5 * r2 / (g.sigma * g.sigma));
  }
  return v;
}

inline void validate_mixture(const GaussianMixture& mix, std::size_t dims) {
  if (mix.empty()) throw std::invalid_argument("mixture: no components");
  for (const auto& g : mix) {
    if (g.mean.size() != dims) throw std::invalid_argument("mixture: mean has wrong dimension");
    if (!(g.sigma > 0.0)) throw std::invalid_argument("mixture: sigma must be positive");
    if (!(g.weight > 0.0)) throw std::invalid_argument("mixture: weight must be positive");
  }
}

/// Raster cells per axis used when a mixture is turned into a grid.
inline constexpr int kDefaultCells = 256;

/// Samples the mixture at cell midpoints and renormalizes over the box.
inline GridDensity rasterize_mixture(const GaussianMixture& mix, std::vector<double> lengths,
                                     std::vector<int> cells) {
  validate_mixture(mix, lengths.size());
  GridDensity grid{std::move(cells), std::move(lengths), {}};
  if (grid.cells.size() != grid.lengths.size())
    throw std::invalid_argument("rasterize_mixture: cells and lengths disagree in dimension");
  grid.values.resize(grid.cell_count());
  std::vector<double> x(grid.dims());
  for (std::size_t c = 0; c < grid.values.size(); ++c) {
    grid.cell_center(c, x);
    grid.values[c] = mixture_density(mix, x);
  }
  return normalize_density(std::move(grid));
}

inline GridDensity uniform_density(std::vector<double> lengths, std::vector<int> cells) {
  GridDensity grid{std::move(cells), std::move(lengths), {}};
  grid.values.assign(grid.cell_count(), 1.0);
  return normalize_density(std::move(grid));
}

// ---------------------------------------------------------------------------
// JSON mixtures
// ---------------------------------------------------------------------------

inline GaussianMixture mixture_from_json(const nlohmann::json& j) {
  const nlohmann::json& list = j.is_object() && j.contains("mixture") ? j.at("mixture") : j;
  if (!list.is_array()) throw std::invalid_argument("mixture: expected a list of components");
  GaussianMixture mix;
  for (const auto& item : list) {
    GaussianComponent g;
    g.mean = item.at("mean").get<std::vector<double>>();
    g.sigma = item.at("sigma").get<double>();
    g.weight = item.value("weight", 1.0);
    mix.push_back(std::move(g));
  }
  return mix;
}

inline nlohmann::json mixture_to_json(const GaussianMixture& mix) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& g : mix) list.push_back({{"mean", g.mean}, {"sigma", g.sigma}, {"weight", g.weight}});
  return list;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV grids
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": '" + s + "' is not a number");
  }
  while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
  if (used != s.size()) throw std::invalid_argument(where + ": '" + s + "' is not a number");
  return v;
}

inline GridDensity read_grid_csv(std::istream& in, const std::string& name = "grid csv") {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(name + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() != 4) throw std::invalid_argument(name + ": header must be 'rows,cols,L1,L2'");
  const double rows_d = parse_double(header[0], name + " header");
  const double cols_d = parse_double(header[1], name + " header");
  if (rows_d < 1 || cols_d < 1 || rows_d != std::floor(rows_d) || cols_d != std::floor(cols_d))
    throw std::invalid_argument(name + ": rows and cols must be positive integers");
  const int rows = static_cast<int>(rows_d);
  const int cols = static_cast<int>(cols_d);
  GridDensity grid{{rows, cols},
                   {parse_double(header[2], name + " header"), parse_double(header[3], name + " header")},
                   {}};
  grid.values.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw std::invalid_argument(name + ": expected " + std::to_string(rows) + " rows");
    const auto cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != cols)
      throw std::invalid_argument(name + ": row " + std::to_string(r + 1) + " has " +
                                  std::to_string(cells.size()) + " values, expected " + std::to_string(cols));
    for (const auto& c : cells) grid.values.push_back(parse_double(c, name + " row " + std::to_string(r + 1)));
  }
  return normalize_density(std::move(grid));
}

inline GridDensity read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read_grid_csv(in, path.string());
}

inline void write_grid_csv(std::ostream& out, const GridDensity& grid) {
  if (grid.dims() != 2) throw std::invalid_argument("write_grid_csv: only 2-D grids are supported");
  out << grid.cells[0] << ',' << grid.cells[1] << ',' << std::setprecision(17) << grid.lengths[0] << ','
      << grid.lengths[1] << '\n';
  for (int r = 0; r < grid.cells[0]; ++r) {
    for (int c = 0; c < grid.cells[1]; ++c) {
      if (c) out << ',';
      out << grid.values[static_cast<std::size_t>(r) * grid.cells[1] + c];
    }
    out << '\n';
  }
}

}  // namespace moes
