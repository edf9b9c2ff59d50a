#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "noisereg/paths.hpp"

namespace noisereg {

/// Real-valued function of a point in R^d.
using ScalarFunction = std::function<double(std::span<const double>)>;

/// Uniform histogram grid on the hypercube [lower, upper]^d, M bins per axis.
///
/// Bin centers are lower + (i + 1/2) h. Construction rejects boxes that would
/// put a center exactly on the origin, so a singular field is never sampled
/// there; symmetric() with an even bin count is the usual way to build one.
class SpatialGrid {
 public:
  SpatialGrid(std::size_t dim, double lower, double upper, std::size_t bins);

  /// [-half_width, half_width]^d; bins must be even.
  static SpatialGrid symmetric(std::size_t dim, double half_width, std::size_t bins);

  /// Symmetric grid with the given bin width whose box covers [-radius, radius]^d.
  static SpatialGrid covering(std::size_t dim, double radius, double width);

  std::size_t dim() const noexcept { return dim_; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  std::size_t bins() const noexcept { return bins_; }
  double width() const noexcept { return (upper_ - lower_) / static_cast<double>(bins_); }
  double cell_volume() const noexcept;
  std::size_t total_bins() const noexcept { return total_; }

  double center(std::size_t axis_index) const noexcept {
    return lower_ + (static_cast<double>(axis_index) + 0.5) * width();
  }
  /// Center of the flat (row-major) bin index.
  void center(std::size_t flat, std::span<double> out) const;

  /// Flat bin index containing x, or nullopt when x lies outside the box.
  std::optional<std::size_t> locate(std::span<const double> x) const;

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

 private:
  std::size_t dim_;
  double lower_;
  double upper_;
  std::size_t bins_;
  std::size_t total_;
};

/// Time spent by a path in each bin over a node-aligned window [s, t].
///
/// Counts are stored as integers so window additivity is exact; masses are
/// counts times the time step.
struct OccupationMeasure {
  double s = 0.0;
  double t = 0.0;
  double dt = 0.0;
  SpatialGrid grid;
  std::vector<std::uint64_t> counts;
  std::uint64_t escaped = 0;

  double mass(std::size_t bin) const noexcept { return static_cast<double>(counts[bin]) * dt; }
  double covered_mass() const noexcept;
  double escaped_mass() const noexcept { return static_cast<double>(escaped) * dt; }

  /// Measure of [s, u] + [u, t]; the windows must be adjacent and share a grid.
  OccupationMeasure operator+(const OccupationMeasure& later) const;
};

/// Histogram local-time density L_{s,t}(z_i) = mass_i / h^d.
struct LocalTimeField {
  OccupationMeasure measure;
  std::vector<double> density;

  const SpatialGrid& grid() const noexcept { return measure.grid; }
  double s() const noexcept { return measure.s; }
  double t() const noexcept { return measure.t; }
  double escaped_fraction() const noexcept;

  LocalTimeField operator+(const LocalTimeField& later) const;
};

/// Left-endpoint occupation of the path: every node t_k in [s, t) deposits dt
/// in the bin holding w_{t_k}. The path dimension must match the grid.
OccupationMeasure occupation_measure(const Path& path, const SpatialGrid& grid, double s, double t);

/// Same with node indices k0 <= k1 instead of times.
OccupationMeasure occupation_measure_nodes(const Path& path, const SpatialGrid& grid, std::size_t k0, std::size_t k1);

LocalTimeField local_time(const OccupationMeasure& measure);
LocalTimeField local_time(const Path& path, const SpatialGrid& grid, double s, double t);

/// |∫_0^t f(w_r) dr - Σ_i f(z_i) μ_{0,t}(bin_i)|, both sides by left-endpoint quadrature.
double occupation_formula_residual(const ScalarFunction& f, const Path& path, const SpatialGrid& grid, double t);

/// CSV `z_1..z_d,L` with one row per bin.
void write_csv(std::ostream& out, const LocalTimeField& field);

}  // namespace noisereg
