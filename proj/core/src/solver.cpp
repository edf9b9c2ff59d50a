#include "noisereg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "noisereg/error.hpp"
#include "noisereg/parallel.hpp"
#include "noisereg/stats.hpp"

namespace noisereg {

namespace {

// Shared stepping kernel: advances x by σ(x - w) dB into x. Returns false on blow-up.
bool em_step(const MatrixField& sigma, std::span<double> x, std::span<const double> w, const double* db,
             std::size_t n, double bound, double* shifted, double* matrix) {
  const std::size_t d = x.size();
  for (std::size_t c = 0; c < d; ++c) shifted[c] = x[c] - w[c];
  sigma.evaluate({shifted, d}, {matrix, d * n});
  bool ok = true;
  for (std::size_t r = 0; r < d; ++r) {
    double acc = x[r];
    for (std::size_t c = 0; c < n; ++c) acc += matrix[r * n + c] * db[c];
    x[r] = acc;
    if (!std::isfinite(acc) || std::abs(acc) > bound) ok = false;
  }
  return ok;
}

void check_shapes(const MatrixField& sigma, std::size_t d, std::size_t n) {
  if (sigma.dim() != d || sigma.rows() != d || sigma.cols() != n) {
    std::ostringstream msg;
    msg << "coefficient has shape " << sigma.rows() << "x" << sigma.cols() << " on R^" << sigma.dim() << ", expected "
        << d << "x" << n << " on R^" << d;
    throw ParameterError(msg.str());
  }
}

}  // namespace

SolvePath euler_maruyama(const MatrixField& sigma, const Path& fbm, const BmPath& bm, std::span<const double> x0,
                         double blowup_bound) {
  const std::size_t d = fbm.dim;
  const std::size_t n = bm.path.dim;
  if (!(fbm.grid == bm.path.grid)) throw ParameterError("euler_maruyama: fBm and Brownian grids differ");
  if (x0.size() != d) throw ParameterError("euler_maruyama: x0 has the wrong dimension");
  check_shapes(sigma, d, n);
  SolvePath out{Path(fbm.grid, d), false, 0};
  std::copy(x0.begin(), x0.end(), out.path.values.begin());
  std::vector<double> shifted(d), matrix(d * n);
  const std::size_t steps = fbm.grid.steps();
  for (std::size_t k = 0; k < steps; ++k) {
    auto next = out.path.at(k + 1);
    const auto cur = out.path.at(k);
    std::copy(cur.begin(), cur.end(), next.begin());
    if (!em_step(sigma, next, fbm.at(k), bm.increments.data() + k * n, n, blowup_bound, shifted.data(),
                 matrix.data())) {
      out.blown_up = true;
      out.first_failure = k + 1;
      std::fill(out.path.values.begin() + static_cast<std::ptrdiff_t>((k + 2) * d), out.path.values.end(),
                std::numeric_limits<double>::quiet_NaN());
      break;
    }
  }
  return out;
}

void QuenchedScenario::validate() const {
  const std::size_t d = fbm.path.dim;
  check_shapes(sigma, d, brownian_dim);
  if (x0.size() != d) throw ParameterError("scenario: x0 has the wrong dimension");
  if (paths == 0) throw ParameterError("scenario: ensemble size must be positive");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0)) throw ParameterError("scenario: epsilons must be positive");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ParameterError("scenario: epsilons must strictly decrease");
  }
  if (!(mollifier_width > 0.0)) throw ParameterError("scenario: mollifier width must be positive");
}

SpatialGrid QuenchedScenario::mollification_grid(std::size_t index) const {
  const double eps = epsilons.at(index);
  const double reach =
      std::min(sigma.info().support_radius.value_or(std::numeric_limits<double>::infinity()), 1.0 / eps);
  return SpatialGrid::covering(sigma.dim(), reach, mollifier_width);
}

MatrixField QuenchedScenario::mollified(std::size_t index) const {
  return mollify(sigma, MollifierSpec{epsilons.at(index)}, mollification_grid(index));
}

double Ensemble::brownian(std::size_t i, std::size_t k, std::size_t c) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) acc += increment(i, j, c);
  return acc;
}

Ensemble solve_ensemble(const QuenchedScenario& scenario, const MatrixField& sigma) {
  const auto& fbm = scenario.fbm.path;
  const std::size_t d = fbm.dim;
  const std::size_t n = scenario.brownian_dim;
  check_shapes(sigma, d, n);
  if (scenario.x0.size() != d) throw ParameterError("solve_ensemble: x0 has the wrong dimension");
  const std::size_t steps = fbm.grid.steps();
  const std::size_t points = fbm.grid.points();
  Ensemble e{fbm.grid, d, n, scenario.paths, std::vector<double>(scenario.paths * points * d),
             std::vector<double>(scenario.paths * steps * n), std::vector<std::uint8_t>(scenario.paths, 0), 0};

  parallel_for(scenario.paths, scenario.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> shifted(d), matrix(d * n);
    for (std::size_t i = begin; i < end; ++i) {
      const auto bm = generate_bm(n, fbm.grid, scenario.base_seed, i);
      std::copy(bm.increments.begin(), bm.increments.end(),
                e.increments.begin() + static_cast<std::ptrdiff_t>(i * steps * n));
      double* xs = e.states.data() + i * points * d;
      std::copy(scenario.x0.begin(), scenario.x0.end(), xs);
      for (std::size_t k = 0; k < steps; ++k) {
        std::copy(xs + k * d, xs + (k + 1) * d, xs + (k + 1) * d);
        if (!em_step(sigma, {xs + (k + 1) * d, d}, fbm.at(k), bm.increments.data() + k * n, n,
                     scenario.blowup_bound, shifted.data(), matrix.data())) {
          e.blown_up[i] = 1;
          std::fill(xs + (k + 2) * d, xs + points * d, std::numeric_limits<double>::quiet_NaN());
          break;
        }
      }
    }
  });
  for (auto b : e.blown_up) e.blowup_count += b;
  if (static_cast<double>(e.blowup_count) > scenario.max_blowup_fraction * static_cast<double>(scenario.paths)) {
    std::ostringstream msg;
    msg << e.blowup_count << " of " << scenario.paths << " paths exceeded |X| > " << scenario.blowup_bound
        << " (tolerated fraction " << scenario.max_blowup_fraction << ")";
    throw BlowupError(msg.str());
  }
  return e;
}

std::vector<Window> dyadic_windows(const TimeGrid& grid, int min_level, int max_level) {
  if (min_level < 0 || max_level < min_level) throw ParameterError("dyadic_windows: invalid level range");
  std::vector<Window> out;
  for (int l = min_level; l <= max_level; ++l) {
    const std::size_t count = std::size_t{1} << l;
    if (grid.steps() % count != 0) throw ParameterError("dyadic_windows: level finer than the grid");
    const std::size_t width = grid.steps() / count;
    for (std::size_t i = 0; i < count; ++i) out.push_back(Window{i * width, (i + 1) * width});
  }
  return out;
}

std::vector<MomentEntry> moment_table(const Ensemble& ensemble, std::span<const double> ms,
                                      std::span<const Window> windows) {
  std::vector<MomentEntry> out;
  std::vector<double> samples;
  samples.reserve(ensemble.paths);
  for (const auto& w : windows) {
    for (double m : ms) {
      samples.clear();
      for (std::size_t i = 0; i < ensemble.paths; ++i) {
        if (!ensemble.valid(i)) continue;
        double r2 = 0.0;
        for (std::size_t c = 0; c < ensemble.dim; ++c) {
          const double dx = ensemble.state(i, w.k1, c) - ensemble.state(i, w.k0, c);
          r2 += dx * dx;
        }
        samples.push_back(std::pow(r2, m / 2.0));
      }
      out.push_back(MomentEntry{ensemble.grid.node(w.k0), ensemble.grid.node(w.k1), m, mean(samples),
                                standard_error(samples)});
    }
  }
  return out;
}

void write_csv(std::ostream& out, std::span<const MomentEntry> table) {
  out << "s,t,m,moment,stderr\n";
  const auto old = out.precision(17);
  for (const auto& e : table) out << e.s << ',' << e.t << ',' << e.m << ',' << e.moment << ',' << e.std_error << '\n';
  out.precision(old);
}

void ito_sum(const MatrixField& sigma, const Path& fbm, const Ensemble& reference, std::size_t path,
             std::size_t k_end, std::span<double> out) {
  const std::size_t d = reference.dim;
  const std::size_t n = reference.brownian_dim;
  std::vector<double> shifted(d), matrix(d * n);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < k_end; ++k) {
    const auto x = reference.state(path, k);
    const auto w = fbm.at(k);
    for (std::size_t c = 0; c < d; ++c) shifted[c] = x[c] - w[c];
    sigma.evaluate(shifted, matrix);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < n; ++c) out[r] += matrix[r * n + c] * reference.increment(path, k, c);
  }
}

IntegralSequence mollified_integral_sequence(const QuenchedScenario& scenario, std::span<const MatrixField> fields,
                                             const Ensemble& reference, double p, double norm_exponent) {
  if (fields.size() != scenario.epsilons.size())
    throw ParameterError("mollified_integral_sequence: one field per epsilon is required");
  if (fields.size() < 2) throw InsufficientDataError("mollified_integral_sequence: need at least two epsilons");
  const std::size_t d = reference.dim;
  const std::size_t steps = reference.grid.steps();
  IntegralSequence seq;
  seq.epsilons = scenario.epsilons;
  seq.norm_exponent = norm_exponent;
  seq.p = p;
  for (const auto& f : fields) {
    std::vector<double> values(reference.paths * d, 0.0);
    parallel_for(reference.paths, scenario.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (!reference.valid(i)) continue;
        ito_sum(f, scenario.fbm.path, reference, i, steps, {values.data() + i * d, d});
      }
    });
    seq.integrals.push_back(std::move(values));
  }
  for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < reference.paths; ++i) {
      if (!reference.valid(i)) continue;
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = seq.integrals[k][i * d + c] - seq.integrals[k + 1][i * d + c];
        r2 += diff * diff;
      }
      acc += std::pow(r2, norm_exponent / 2.0);
      ++used;
    }
    seq.consecutive_differences.push_back(std::pow(acc / static_cast<double>(std::max<std::size_t>(used, 1)),
                                                   1.0 / norm_exponent));
    const auto gap = linear_combination(1.0, fields[k], -1.0, fields[k + 1]);
    const auto grid = scenario.mollification_grid(k);
    const double reach = std::max(std::abs(grid.lower()), grid.upper()) + 2.0 * scenario.epsilons[k];
    seq.field_differences.push_back(lp_norm(gap, p, SpatialGrid::covering(d, reach, scenario.mollifier_width)).value);
    seq.ratios.push_back(seq.consecutive_differences.back() / seq.field_differences.back());
  }
  seq.decreasing = true;
  for (std::size_t k = 1; k < seq.consecutive_differences.size(); ++k)
    if (seq.consecutive_differences[k] > 1.1 * seq.consecutive_differences[k - 1]) seq.decreasing = false;
  seq.tracking = std::all_of(seq.ratios.begin(), seq.ratios.end(), [](double r) { return r >= 1.0 / 3.0 && r <= 3.0; });
  return seq;
}

}  // namespace noisereg
