#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisereg/fields.hpp"
#include "noisereg/germ_bank.hpp"
#include "noisereg/solver.hpp"

namespace noisereg {

/// One checked identity: pass iff |left - right| <= k_sigma * stderr + margin.
struct IdentityReport {
  std::string tag;   ///< isometry | qv | cross-term | martingale
  std::string name;  ///< identifies the case within the tag
  double left = 0.0;
  double right = 0.0;
  double std_error = 0.0;
  double margin = 0.0;
  double k_sigma = 4.0;
  bool pass = false;
};

IdentityReport make_report(std::string tag, std::string name, double left, double right, double std_error,
                           double margin, double k_sigma = 4.0);

void to_json(nlohmann::json& j, const IdentityReport& r);
/// One JSON object per line.
void write_jsonl(std::ostream& out, std::span<const IdentityReport> reports);
/// CSV `check,left,right,stderr,margin,pass`.
void write_csv(std::ostream& out, std::span<const IdentityReport> reports);

struct MomentRatio {
  double m = 2.0;
  double gamma0 = 1.0;
  double ratio = 0.0;      ///< max over windows of mean |X_{s,t}|^m / |t-s|^{m γ0 / 2}
  double std_error = 0.0;  ///< bootstrap over paths
  Window argmax;
  std::size_t excluded = 0;  ///< blown-up paths left out
};

MomentRatio moment_ratio(const Ensemble& ensemble, double m, double gamma0, std::span<const Window> windows,
                         std::size_t bootstrap = 100, std::uint64_t seed = 0);

struct MomentRatioReport {
  double m = 2.0;
  double gamma0 = 1.0;
  std::vector<double> epsilons;
  std::vector<MomentRatio> ratios;
  double spread = 0.0;            ///< max ratio / min ratio
  double spread_limit = 2.0;
  bool rising_tail = false;       ///< strictly increasing over the last three epsilons
  bool bounded = false;           ///< spread within the limit and no rising tail
};

/// Summarises per-ε ratios. Throws ParameterError unless γ0 < 1 - H d / 2.
MomentRatioReport moment_ratio_report(std::vector<double> epsilons, std::vector<MomentRatio> ratios, double hurst,
                                      std::size_t dim, double spread_limit = 2.0);

void to_json(nlohmann::json& j, const MomentRatioReport& r);

/// ∫_s^t g(X_r - w_r) dr by path quadrature against the sewing of the germ
/// (g * L_{u,v})(X_u); g must be a 1 x 1 field. The margin budgets histogram
/// binning (local slope of g near X_r - w_r, times h sqrt(d), integrated
/// over the window) plus the gap between the extrapolated
/// and finest sewing levels.
IdentityReport lebesgue_vs_sewing(const Path& x, const Path& fbm, const MatrixField& g, const SpatialGrid& field_grid,
                                  double s, double t);

/// E[(X^j_t - x0^j)^2] against E[(I A^j)_{0,t}], field index `field` of `sums`.
IdentityReport ito_isometry_check(const Ensemble& ensemble, std::span<const double> x0, const GermSums& sums,
                                  std::size_t field, double t, std::size_t j, double relative_margin = 0.05,
                                  double k_sigma = 4.0);

/// Field indices inside a GermSums for the martingale families.
struct MartingaleFields {
  std::vector<std::size_t> quadratic;  ///< A^j, per state coordinate j
  std::vector<std::size_t> mixed;      ///< a^{ij}, index i * d + j
};

/// Values of the fixed test-functional dictionary ("v1") for one path at node ks:
/// 1, clip(X^j_s), clip(B^i_s), clip(X^1_{s/2}) clip(X^1_s), clip(X^1_s) clip(B^1_s),
/// clip(.) clamping to [-1, 1].
std::vector<std::pair<std::string, double>> dictionary_v1(const Ensemble& ensemble, std::size_t path,
                                                          std::size_t ks);

inline constexpr const char* kDictionaryVersion = "v1";

/// E[φ (Z_t - Z_s)] for Z = M^j, (M^j)^2 - I A^j and M^j B^i - I a^{ij}, every
/// dictionary functional and every (s, t) pair. `sums` must hold s and t as queries.
std::vector<IdentityReport> martingale_residuals(const Ensemble& ensemble, std::span<const double> x0,
                                                 const GermSums& sums, const MartingaleFields& fields,
                                                 std::span<const std::pair<double, double>> pairs,
                                                 double k_sigma = 4.0);

/// E[(X̄^j_t - x0^j) I^j_t] against E[(I G^j)_{0,t}], with I the Itô sum of σ_ε
/// along the reference ensemble (paths x dim values) and G the mixed germ.
/// Throws HypothesisError unless d/p < 1.
IdentityReport cross_term_check(const Ensemble& reference, std::span<const double> x0,
                                std::span<const double> integrals, const GermSums& sums, std::size_t field,
                                double t, std::size_t j, double p, double relative_margin = 0.05,
                                double k_sigma = 4.0);

}  // namespace noisereg
