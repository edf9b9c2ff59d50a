#include "noisereg/occupation.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "noisereg/error.hpp"

namespace noisereg {

SpatialGrid::SpatialGrid(std::size_t dim, double lower, double upper, std::size_t bins)
    : dim_(dim), lower_(lower), upper_(upper), bins_(bins), total_(1) {
  if (dim == 0) throw ParameterError("SpatialGrid: dimension must be positive");
  if (bins == 0) throw ParameterError("SpatialGrid: need at least one bin");
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
    throw ParameterError("SpatialGrid: box must satisfy lower < upper");
  for (std::size_t a = 0; a < dim; ++a) {
    if (total_ > std::numeric_limits<std::size_t>::max() / bins)
      throw ParameterError("SpatialGrid: bin count overflows");
    total_ *= bins;
  }
  const double k = -lower / width() - 0.5;
  if (k >= 0.0 && k < static_cast<double>(bins) && std::abs(k - std::round(k)) < 1e-9) {
    std::ostringstream msg;
    msg << "SpatialGrid: bin center at the origin (box [" << lower << ", " << upper << "], " << bins
        << " bins); use a half-offset box";
    throw ParameterError(msg.str());
  }
}

SpatialGrid SpatialGrid::symmetric(std::size_t dim, double half_width, std::size_t bins) {
  if (bins % 2 != 0) throw ParameterError("SpatialGrid::symmetric needs an even bin count");
  return SpatialGrid(dim, -half_width, half_width, bins);
}

SpatialGrid SpatialGrid::covering(std::size_t dim, double radius, double width) {
  if (!(width > 0.0)) throw ParameterError("SpatialGrid::covering: width must be positive");
  const auto half = static_cast<std::size_t>(std::ceil(radius / width - 1e-9));
  const std::size_t bins = 2 * std::max<std::size_t>(half, 1);
  return SpatialGrid(dim, -width * static_cast<double>(bins / 2), width * static_cast<double>(bins / 2), bins);
}

double SpatialGrid::cell_volume() const noexcept { return std::pow(width(), static_cast<double>(dim_)); }

void SpatialGrid::center(std::size_t flat, std::span<double> out) const {
  for (std::size_t a = dim_; a-- > 0;) {
    out[a] = center(flat % bins_);
    flat /= bins_;
  }
}

std::optional<std::size_t> SpatialGrid::locate(std::span<const double> x) const {
  const double h = width();
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dim_; ++a) {
    const double v = x[a];
    if (!(v >= lower_ && v <= upper_)) return std::nullopt;
    auto i = static_cast<std::size_t>(std::floor((v - lower_) / h));
    if (i >= bins_) i = bins_ - 1;
    flat = flat * bins_ + i;
  }
  return flat;
}

double OccupationMeasure::covered_mass() const noexcept {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  return static_cast<double>(total) * dt;
}

OccupationMeasure OccupationMeasure::operator+(const OccupationMeasure& later) const {
  if (!(grid == later.grid) || dt != later.dt) throw ParameterError("occupation measures live on different grids");
  if (t != later.s) throw ParameterError("occupation windows are not adjacent");
  OccupationMeasure out{s, later.t, dt, grid, counts, escaped + later.escaped};
  for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += later.counts[i];
  return out;
}

double LocalTimeField::escaped_fraction() const noexcept {
  const double len = measure.t - measure.s;
  return len > 0.0 ? measure.escaped_mass() / len : 0.0;
}

LocalTimeField LocalTimeField::operator+(const LocalTimeField& later) const {
  return local_time(measure + later.measure);
}

OccupationMeasure occupation_measure_nodes(const Path& path, const SpatialGrid& grid, std::size_t k0,
                                           std::size_t k1) {
  if (path.dim != grid.dim()) throw ParameterError("occupation: path and grid dimensions differ");
  if (k0 > k1 || k1 > path.grid.steps()) throw ParameterError("occupation: window outside the time grid");
  OccupationMeasure out{path.grid.node(k0), path.grid.node(k1), path.grid.dt(), grid,
                        std::vector<std::uint64_t>(grid.total_bins(), 0), 0};
  for (std::size_t k = k0; k < k1; ++k) {
    if (auto bin = grid.locate(path.at(k)))
      ++out.counts[*bin];
    else
      ++out.escaped;
  }
  return out;
}

OccupationMeasure occupation_measure(const Path& path, const SpatialGrid& grid, double s, double t) {
  return occupation_measure_nodes(path, grid, path.grid.index_of(s), path.grid.index_of(t));
}

LocalTimeField local_time(const OccupationMeasure& measure) {
  LocalTimeField out{measure, std::vector<double>(measure.counts.size())};
  const double scale = measure.dt / measure.grid.cell_volume();
  for (std::size_t i = 0; i < out.density.size(); ++i) out.density[i] = static_cast<double>(measure.counts[i]) * scale;
  return out;
}

LocalTimeField local_time(const Path& path, const SpatialGrid& grid, double s, double t) {
  return local_time(occupation_measure(path, grid, s, t));
}

double occupation_formula_residual(const ScalarFunction& f, const Path& path, const SpatialGrid& grid, double t) {
  const std::size_t kt = path.grid.index_of(t);
  const double dt = path.grid.dt();
  double along_path = 0.0;
  for (std::size_t k = 0; k < kt; ++k) along_path += f(path.at(k)) * dt;
  const auto mu = occupation_measure_nodes(path, grid, 0, kt);
  std::vector<double> z(grid.dim());
  double over_bins = 0.0;
  for (std::size_t i = 0; i < mu.counts.size(); ++i) {
    if (mu.counts[i] == 0) continue;
    grid.center(i, z);
    over_bins += f(z) * mu.mass(i);
  }
  return std::abs(along_path - over_bins);
}

void write_csv(std::ostream& out, const LocalTimeField& field) {
  const auto& g = field.grid();
  for (std::size_t a = 0; a < g.dim(); ++a) out << "z_" << (a + 1) << ',';
  out << "L\n";
  const auto old = out.precision(17);
  std::vector<double> z(g.dim());
  for (std::size_t i = 0; i < field.density.size(); ++i) {
    g.center(i, z);
    for (double v : z) out << v << ',';
    out << field.density[i] << '\n';
  }
  out.precision(old);
}

}  // namespace noisereg
