#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisereg/averaging.hpp"
#include "noisereg/paths.hpp"

namespace noisereg {

/// Two-parameter function (s, t) -> R^dim. The oracle writes into `out` and
/// must be safe to call concurrently.
struct Germ {
  std::size_t dim = 1;
  std::function<void(double s, double t, std::span<double> out)> eval;
  std::optional<double> alpha;  ///< declared exponents, when known
  std::optional<double> beta;

  std::vector<double> operator()(double s, double t) const;
};

/// (δA)_{s,u,t} = A_{s,t} - A_{s,u} - A_{u,t}.
std::vector<double> delta(const Germ& germ, double s, double u, double t);

struct SewingOptions {
  double noise_floor = -1.0;  ///< level differences at or below it are ignored; -1 means 1e-12 * max |S_k|
  unsigned threads = 1;
};

struct SewingResult {
  double s = 0.0;
  double t = 0.0;
  std::size_t dim = 1;
  std::vector<std::vector<double>> level_sums;  ///< S_0..S_K, each of size dim
  std::vector<double> level_differences;        ///< |S_{k+1} - S_k|, Euclidean norm
  std::vector<double> value;                    ///< S_K
  std::optional<std::vector<double>> extrapolated;  ///< Richardson estimate when the rate is stable
  std::optional<double> rate;                   ///< fitted decay rate of the level differences (base 2)
  std::optional<double> rate_half_width;
  bool divergent = false;
  std::vector<double> finest;                   ///< the 2^K germ values of the finest level, point-major

  std::size_t levels() const noexcept { return level_sums.empty() ? 0 : level_sums.size() - 1; }
  /// Best available estimate: the extrapolated value if present, otherwise S_K.
  const std::vector<double>& best() const noexcept { return extrapolated ? *extrapolated : value; }
};

/// Dyadic partition sums S_k = Σ_{i<2^k} A over [s, t] for k = 0..K.
///
/// A rate is reported once at least three level differences clear the noise
/// floor; three consecutive non-decreasing differences set the divergence flag.
SewingResult sew(const Germ& germ, double s, double t, int levels, const SewingOptions& options = {});

/// sup over the dyadic subwindows of [s, t] down to `window_level` of
/// |IA_{u,v} - A_{u,v}| / |v-u|^beta, where IA on a window is the sum of the
/// finest-level germ values it contains.
double remainder_check(const Germ& germ, const SewingResult& result, double beta, int window_level = 8);

/// A scalar germ evaluated for Monte Carlo path `path` on the node window [k0, k1].
using PathGerm = std::function<double(std::size_t path, std::size_t k0, std::size_t k1)>;

/// Bounded test weights φ_j(path, k) that depend only on the path up to node k.
using TestWeights = std::function<void(std::size_t path, std::size_t k, std::vector<double>& out)>;

struct ScalingFit {
  double exponent = 0.0;
  double half_width = 0.0;
  bool degenerate = false;
  std::vector<double> log2_length;
  std::vector<double> log2_value;
};

struct StochasticSewingDiagnostic {
  ScalingFit moment;       ///< exponent of max over windows of ||δA_{s,u,t}||_{L^m}
  ScalingFit conditional;  ///< exponent of max over windows and weights of |E[φ δA_{s,u,t}]|
};

/// Empirical exponents for the two stochastic-sewing conditions.
///
/// For every dyadic window [s, t] at the given levels (u its midpoint) the
/// L^m norm of δA across paths and the test-weight projections E[φ_j(s) δA]
/// are measured; the maxima per level are regressed on log2 |t - s|. The
/// projections are a surrogate for the conditional expectation, which cannot
/// be sampled directly. Needs at least 1000 paths.
StochasticSewingDiagnostic stochastic_sewing_diagnostic(const PathGerm& germ, std::size_t paths,
                                                        const TimeGrid& grid, double m,
                                                        std::span<const int> window_levels,
                                                        const TestWeights& weights = {});

/// (s, t, x) -> T_{s,t} b(x), written into out.
using AveragedDrift = std::function<void(double s, double t, std::span<const double> x, std::span<double> out)>;

struct YoungSolution {
  Path path;
  bool blown_up = false;
  std::size_t first_failure = 0;               ///< node index where |X| first exceeded the bound
  std::optional<HolderEstimate> time_regularity;  ///< first component, when the grid supports it
};

/// Explicit scheme X_{k+1} = X_k + T_{t_k,t_{k+1}} b(X_k).
YoungSolution nonlinear_young_solve(const AveragedDrift& drift, std::span<const double> y0, const TimeGrid& grid,
                                    double blowup_bound = 1e6);

void to_json(nlohmann::json& j, const SewingResult& result);

}  // namespace noisereg
