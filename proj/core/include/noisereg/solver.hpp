#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "noisereg/fields.hpp"
#include "noisereg/paths.hpp"

namespace noisereg {

/// Default blow-up bound on |X|.
inline constexpr double kBlowupBound = 1e6;

struct SolvePath {
  Path path;
  bool blown_up = false;
  std::size_t first_failure = 0;  ///< first node whose state is non-finite or beyond the bound
};

/// X_{k+1} = X_k + σ(X_k - w_{t_k}) (B_{t_{k+1}} - B_{t_k}) using the stored
/// Brownian increments. σ must be d x n with d the fBm dimension and n the
/// Brownian dimension. After a blow-up the remaining states are NaN.
SolvePath euler_maruyama(const MatrixField& sigma, const Path& fbm, const BmPath& bm, std::span<const double> x0,
                         double blowup_bound = kBlowupBound);

/// Frozen fBm realisation, coefficient, mollification schedule and ensemble size.
struct QuenchedScenario {
  FbmPath fbm;
  MatrixField sigma;
  std::vector<double> epsilons;    ///< strictly decreasing
  double mollifier_width = 1.0 / 1024.0;  ///< bin width of the mollification grid
  std::vector<double> x0;
  std::size_t brownian_dim = 1;
  std::size_t paths = 1000;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;
  double blowup_bound = kBlowupBound;
  double max_blowup_fraction = 0.01;

  /// Shape and schedule checks; throws ParameterError.
  void validate() const;
  /// σ_ε for epsilons[index] on a grid of width mollifier_width.
  MatrixField mollified(std::size_t index) const;
  /// Grid used to mollify (and to measure L^p gaps between mollifications).
  SpatialGrid mollification_grid(std::size_t index) const;
};

/// M solution paths sharing one fBm; driver i is generate_bm(n, grid, base_seed, i).
struct Ensemble {
  TimeGrid grid;
  std::size_t dim = 1;
  std::size_t brownian_dim = 1;
  std::size_t paths = 0;
  std::vector<double> states;       ///< paths x (N+1) x dim
  std::vector<double> increments;   ///< paths x N x brownian_dim, the driver increments
  std::vector<std::uint8_t> blown_up;
  std::size_t blowup_count = 0;

  double state(std::size_t i, std::size_t k, std::size_t c) const {
    return states[(i * grid.points() + k) * dim + c];
  }
  std::span<const double> state(std::size_t i, std::size_t k) const {
    return {states.data() + (i * grid.points() + k) * dim, dim};
  }
  double increment(std::size_t i, std::size_t k, std::size_t c) const {
    return increments[(i * grid.steps() + k) * brownian_dim + c];
  }
  /// Brownian value B^{(i)}_{t_k}, component c (prefix sum of the increments).
  double brownian(std::size_t i, std::size_t k, std::size_t c) const;
  bool valid(std::size_t i) const { return blown_up[i] == 0; }
};

/// Solves every member with the given coefficient. Throws BlowupError if more
/// than max_blowup_fraction of the paths blow up; fewer are flagged and kept.
Ensemble solve_ensemble(const QuenchedScenario& scenario, const MatrixField& sigma);

struct Window {
  std::size_t k0 = 0;
  std::size_t k1 = 0;
  friend bool operator==(const Window&, const Window&) = default;
};

/// All dyadic windows of [0, T] at levels min_level..max_level (level l has 2^l windows).
std::vector<Window> dyadic_windows(const TimeGrid& grid, int min_level, int max_level);

struct MomentEntry {
  double s = 0.0;
  double t = 0.0;
  double m = 2.0;
  double moment = 0.0;  ///< sample mean of |X_t - X_s|^m over non-blown-up paths
  double std_error = 0.0;
};

std::vector<MomentEntry> moment_table(const Ensemble& ensemble, std::span<const double> ms,
                                      std::span<const Window> windows);

/// CSV `s,t,m,moment,stderr`.
void write_csv(std::ostream& out, std::span<const MomentEntry> table);

/// Terminal Itô sums of each σ_ε along a fixed reference ensemble, with the
/// Cauchy diagnostics of the sequence.
struct IntegralSequence {
  std::vector<double> epsilons;
  std::vector<std::vector<double>> integrals;  ///< per ε: paths x dim values of Σ σ_ε(X̄_k - w_k) ΔB_k
  double norm_exponent = 2.0;
  std::vector<double> consecutive_differences;  ///< empirical L^q norm of I^{ε_k} - I^{ε_{k+1}}
  std::vector<double> field_differences;        ///< |σ_{ε_k} - σ_{ε_{k+1}}|_{L^p}
  double p = 2.0;
  std::vector<double> ratios;                   ///< consecutive_differences / field_differences
  bool decreasing = false;  ///< each difference at most 1.1 times the previous
  bool tracking = false;    ///< every ratio within [1/3, 3]
};

/// Integrates σ_{ε_k} (fields[k]) along the states of `reference` with its own
/// driver increments, so all ε share both the integrand path and the noise.
IntegralSequence mollified_integral_sequence(const QuenchedScenario& scenario, std::span<const MatrixField> fields,
                                             const Ensemble& reference, double p, double norm_exponent = 2.0);

/// Σ_k σ(X̄_k - w_k) ΔB_k for one path of the reference ensemble.
void ito_sum(const MatrixField& sigma, const Path& fbm, const Ensemble& reference, std::size_t path,
             std::size_t k_end, std::span<double> out);

}  // namespace noisereg
