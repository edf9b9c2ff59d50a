#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"

namespace noisereg {

/// A scalar function tabulated at the bin centers of a SpatialGrid.
struct GridFunction {
  SpatialGrid grid;
  std::vector<double> values;  // row-major, grid.total_bins()
};

GridFunction sample_on_grid(const ScalarFunction& f, const SpatialGrid& grid);

/// Uniform hypercube lattice origin + i * spacing, `size` nodes per axis.
struct Lattice {
  std::size_t dim = 1;
  double origin = 0.0;
  double spacing = 1.0;
  std::size_t size = 0;

  double node(std::size_t i) const noexcept { return origin + static_cast<double>(i) * spacing; }
  std::size_t total() const noexcept;
};

/// Values of T_{s,t} f on a lattice; evaluation between nodes is multilinear
/// and anything outside the lattice is zero.
struct AveragedField {
  double s = 0.0;
  double t = 0.0;
  Lattice lattice;
  std::vector<double> values;

  double operator()(std::span<const double> x) const;
};

/// Left-endpoint quadrature of ∫_s^t f(x - w_r) dr at each probe point.
/// Probes are packed point-major with path.dim coordinates each.
std::vector<double> average_direct(const ScalarFunction& f, const Path& path, double s, double t,
                                   std::span<const double> probes);

/// T_{s,t} f = f * L_{s,t} by zero-padded FFT convolution of the tabulated f
/// against the occupation masses. Both grids must share dimension and bin
/// width. Throws CoverageError when more than max_escaped_fraction of the
/// window was spent outside the local-time box.
AveragedField average_via_local_time(const GridFunction& f, const LocalTimeField& local_time,
                                     double max_escaped_fraction = 1e-3);

/// CSV `x_1..x_d,value` over lattice nodes.
void write_csv(std::ostream& out, const AveragedField& field);

enum class HolderDirection { time, space };

struct HolderOptions {
  int min_log2 = 2;       ///< finest lag 2^min_log2; the two finest lags are skipped by default
  int max_log2 = -1;      ///< coarsest lag; -1 picks floor(log2 n) - 5 (at least min_log2 + 3)
  double noise_floor = -1.0;  ///< increments at or below it count as zero; -1 means 1e-12 * max|v|
};

struct HolderEstimate {
  double exponent = 0.0;
  double half_width = 0.0;  ///< 95% confidence half-width of the fitted slope
  bool degenerate = false;  ///< every increment at every scale sat below the noise floor
  std::vector<double> log2_lag;
  std::vector<double> log2_sup;
};

/// Hölder exponent of equally spaced samples from the log-log slope of the
/// sup-increment at dyadic lags.
///
/// In the space direction the sup runs over every increment, so isolated
/// jumps are seen at every lag. In the time direction the sup is taken over a
/// fixed number of disjoint increments per lag and averaged over offsets; a
/// plain sup over n/lag increments picks up a sqrt(log(n/lag)) factor that
/// biases rough paths low.
HolderEstimate holder_exponent(std::span<const double> samples, HolderDirection direction,
                               const HolderOptions& options = {});

enum class RegularityVariant { I, II };

/// Exclusive regularity suprema for the averaging operator of fBm.
struct RegularityBudget {
  double hurst = 0.0;
  std::size_t dim = 1;
  double p = 2.0;
  RegularityVariant variant = RegularityVariant::II;
  double lambda_max = 0.0;

  /// Time-regularity supremum at spatial regularity lambda.
  double gamma_max(double lambda) const noexcept;
};

RegularityBudget admissible_regularity(double hurst, std::size_t dim, double p, RegularityVariant variant);

/// Largest admissible Hurst index (exclusive) for the singular SDE with σ in L^p.
double hurst_admissible_main(std::size_t dim, double p);

/// Hurst bound when the driver is itself an fBm with index H' in (1/2, 1).
double hurst_admissible_fbm_driver(double hurst_driver, std::size_t dim, double p);

void to_json(nlohmann::json& j, const RegularityBudget& budget);

}  // namespace noisereg
