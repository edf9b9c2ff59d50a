#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisereg/occupation.hpp"

namespace noisereg {

/// Descriptive metadata carried alongside a field.
struct FieldInfo {
  std::string name;
  std::optional<double> support_radius;  ///< field vanishes for |x| > radius
  std::optional<double> lp_threshold;    ///< in L^p exactly for p < threshold (absent: every p)
  bool singular_at_origin = false;       ///< unbounded near x = 0
};

/// Matrix-valued coefficient x in R^d -> R^{rows x cols}.
///
/// The oracle writes the row-major matrix into `out` without allocating and
/// returns true when the value had to be clamped (evaluation on a singular
/// point). Fields are immutable and safe to share between threads.
class MatrixField {
 public:
  using Oracle = std::function<bool(std::span<const double> x, std::span<double> out)>;

  MatrixField(std::size_t dim, std::size_t rows, std::size_t cols, Oracle oracle, FieldInfo info = {});

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t entries() const noexcept { return rows_ * cols_; }
  const FieldInfo& info() const noexcept { return info_; }

  bool evaluate(std::span<const double> x, std::span<double> out) const { return oracle_(x, out); }
  std::vector<double> operator()(std::span<const double> x) const;

  /// Values at every bin center, bin-major: total_bins() * entries().
  std::vector<double> sample(const SpatialGrid& grid) const;

  /// Scalar view of entry (r, c).
  ScalarFunction entry(std::size_t r, std::size_t c) const;

  bool in_lp(double p) const noexcept { return !info_.lp_threshold || p < *info_.lp_threshold; }

 private:
  std::size_t dim_;
  std::size_t rows_;
  std::size_t cols_;
  Oracle oracle_;
  FieldInfo info_;
};

/// x -> c * Id_{dim}.
MatrixField constant_identity(std::size_t dim, double c = 1.0);

/// x -> A for a fixed row-major matrix.
MatrixField constant_matrix(std::size_t dim, std::size_t rows, std::size_t cols, std::vector<double> values);

/// a * f + b * g on matching shapes.
MatrixField linear_combination(double a, const MatrixField& f, double b, const MatrixField& g);

/// Field defined by values on an equally spaced lattice of points
/// origin + i * spacing per axis; multilinear in between, zero outside.
MatrixField lattice_field(std::size_t dim, std::size_t rows, std::size_t cols, double origin, double spacing,
                          std::size_t size, std::vector<double> values, FieldInfo info = {});

/// Constraints recorded for the singular example.
struct SingularExampleInfo {
  double gamma;
  double radius;
  std::size_t dim;
  double lp_threshold;           ///< d / gamma (infinite for gamma = 0)
  bool gamma_below_one;          ///< gamma < 1
  bool two_below_d_over_gamma;   ///< 2 < d / gamma; only binding when d = 1
};

/// Value returned when the singular example is evaluated exactly at x = 0.
inline constexpr double kSingularClamp = 1e9;

/// σ(x) = Id |x|^{-gamma} 1_{|x| <= K}, d x d.
MatrixField singular_example(double gamma, double radius, std::size_t dim);
SingularExampleInfo singular_example_info(double gamma, double radius, std::size_t dim);

/// Polynomial bump ρ(x) = c (1 - |x|^2)^3 on the unit ball and a C^∞ cutoff
/// φ^ε equal to 1 on |x| <= 1/(2ε) and 0 for |x| >= 1/ε.
struct MollifierSpec {
  double epsilon = 0.25;

  /// ρ at radius r with the analytic unit-mass constant in dimension d.
  static double kernel(double r, std::size_t dim);
  double cutoff(double r) const;
  double scaled_kernel(double r, std::size_t dim) const;  ///< ρ^ε(x) = ε^{-d} ρ(x/ε)
};

/// σ_ε = ρ^ε * (φ^ε σ) computed on `grid`: φ^ε σ is tabulated at the bin
/// centers, convolved with the discrete kernel (renormalised to unit sum),
/// and returned as a lattice field supported in B(0, R + ε), R the smaller of
/// 1/ε and the support radius of σ.
///
/// Throws ResolutionError when h > ε/4 and ParameterError when the grid box
/// does not contain B(0, R).
MatrixField mollify(const MatrixField& field, const MollifierSpec& spec, const SpatialGrid& grid);

/// x -> Tr(σ(x)^* σ(x)) as a 1 x 1 field.
MatrixField hs_norm_sq(const MatrixField& field);

struct LpNorm {
  double value = 0.0;
  bool integrability_warning = false;
  std::string warning;
};

/// (Σ_i |σ(z_i)|_HS^p h^d)^{1/p}. Bins touching a singular origin are
/// refined recursively towards the singularity; a warning is raised when the
/// refined contributions stop shrinking, or when the field is tagged as not in L^p.
LpNorm lp_norm(const MatrixField& field, double p, const SpatialGrid& grid);

/// CSV `x_1..x_d,s_11..s_rc` over bin centers.
void write_csv(std::ostream& out, const MatrixField& field, const SpatialGrid& grid);

}  // namespace noisereg
