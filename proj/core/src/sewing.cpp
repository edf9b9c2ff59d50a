#include "noisereg/sewing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisereg/error.hpp"
#include "noisereg/parallel.hpp"
#include "noisereg/stats.hpp"

namespace noisereg {

std::vector<double> Germ::operator()(double s, double t) const {
  std::vector<double> out(dim, 0.0);
  eval(s, t, out);
  return out;
}

std::vector<double> delta(const Germ& germ, double s, double u, double t) {
  if (!(s <= u && u <= t)) throw ParameterError("delta: need s <= u <= t");
  auto out = germ(s, t);
  const auto a = germ(s, u);
  const auto b = germ(u, t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] - a[i] - b[i];
  return out;
}

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dyadic_point(double s, double t, std::size_t i, std::size_t count) {
  if (i == count) return t;
  return s + (t - s) * static_cast<double>(i) / static_cast<double>(count);
}

}  // namespace

SewingResult sew(const Germ& germ, double s, double t, int levels, const SewingOptions& options) {
  if (levels < 3) throw ParameterError("sew: need at least 3 levels");
  if (levels > 26) throw ParameterError("sew: more than 26 levels is not supported");
  if (!(s <= t)) throw ParameterError("sew: need s <= t");
  const std::size_t d = germ.dim;
  SewingResult r;
  r.s = s;
  r.t = t;
  r.dim = d;
  std::vector<double> values;
  for (int k = 0; k <= levels; ++k) {
    const std::size_t count = std::size_t{1} << k;
    values.assign(count * d, 0.0);
    parallel_for(count, options.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        germ.eval(dyadic_point(s, t, i, count), dyadic_point(s, t, i + 1, count), {values.data() + i * d, d});
    });
    std::vector<double> sum(d, 0.0);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t c = 0; c < d; ++c) sum[c] += values[i * d + c];
    r.level_sums.push_back(std::move(sum));
  }
  r.finest = std::move(values);
  r.value = r.level_sums.back();

  double scale = 0.0;
  for (const auto& sk : r.level_sums) scale = std::max(scale, norm(sk));
  const double floor_value = options.noise_floor >= 0.0 ? options.noise_floor : 1e-12 * std::max(scale, 1e-300);

  std::vector<double> diff(d);
  for (int k = 0; k < levels; ++k) {
    for (std::size_t c = 0; c < d; ++c) diff[c] = r.level_sums[k + 1][c] - r.level_sums[k][c];
    r.level_differences.push_back(norm(diff));
  }

  // Divergence: three consecutive above-floor differences that never decrease.
  int run = 0;
  for (std::size_t k = 0; k < r.level_differences.size(); ++k) {
    const double dk = r.level_differences[k];
    if (dk <= floor_value) {
      run = 0;
      continue;
    }
    if (run > 0 && dk < r.level_differences[k - 1]) run = 0;
    ++run;
    if (run >= 3) r.divergent = true;
  }

  std::vector<double> ks, logs;
  for (std::size_t k = 0; k < r.level_differences.size(); ++k) {
    if (r.level_differences[k] > floor_value) {
      ks.push_back(static_cast<double>(k));
      logs.push_back(std::log2(r.level_differences[k]));
    }
  }
  if (ks.size() >= 3) {
    // The asymptotic regime is what matters; use the finest five differences.
    const std::size_t first = ks.size() > 5 ? ks.size() - 5 : 0;
    const auto fit = fit_line(std::span(ks).subspan(first), std::span(logs).subspan(first));
    r.rate = -fit.slope;
    r.rate_half_width = fit.points > 2 ? student_t95(fit.points - 2) * fit.slope_stderr : 0.0;
    if (!r.divergent && *r.rate > 0.0 && *r.rate_half_width < 0.25) {
      const double factor = 1.0 / (std::exp2(*r.rate) - 1.0);
      std::vector<double> ex(d);
      const auto& sk = r.level_sums[levels];
      const auto& sk1 = r.level_sums[levels - 1];
      for (std::size_t c = 0; c < d; ++c) ex[c] = sk[c] + (sk[c] - sk1[c]) * factor;
      r.extrapolated = std::move(ex);
    }
  }
  return r;
}

double remainder_check(const Germ& germ, const SewingResult& result, double beta, int window_level) {
  const int levels = static_cast<int>(result.levels());
  if (window_level < 0 || window_level > levels)
    throw ParameterError("remainder_check: window level exceeds the sewing depth");
  if (result.divergent) throw ParameterError("remainder_check: sewing did not converge");
  const std::size_t d = result.dim;
  const std::size_t fine = std::size_t{1} << levels;
  // Prefix sums of the finest germ values give IA on any dyadic window.
  std::vector<double> prefix((fine + 1) * d, 0.0);
  for (std::size_t i = 0; i < fine; ++i)
    for (std::size_t c = 0; c < d; ++c) prefix[(i + 1) * d + c] = prefix[i * d + c] + result.finest[i * d + c];
  double worst = 0.0;
  std::vector<double> a(d), diff(d);
  for (int l = 0; l <= window_level; ++l) {
    const std::size_t count = std::size_t{1} << l;
    const std::size_t span_fine = fine / count;
    for (std::size_t i = 0; i < count; ++i) {
      const double u = dyadic_point(result.s, result.t, i, count);
      const double v = dyadic_point(result.s, result.t, i + 1, count);
      germ.eval(u, v, a);
      for (std::size_t c = 0; c < d; ++c)
        diff[c] = prefix[(i + 1) * span_fine * d + c] - prefix[i * span_fine * d + c] - a[c];
      const double len = v - u;
      if (len <= 0.0) continue;
      worst = std::max(worst, norm(diff) / std::pow(len, beta));
    }
  }
  return worst;
}

namespace {

ScalingFit fit_scaling(std::vector<double> lengths, std::vector<double> values, double floor_value) {
  ScalingFit out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (values[i] > floor_value) {
      out.log2_length.push_back(std::log2(lengths[i]));
      out.log2_value.push_back(std::log2(values[i]));
    }
  }
  if (out.log2_length.empty()) {
    out.degenerate = true;
    out.half_width = std::numeric_limits<double>::infinity();
    return out;
  }
  if (out.log2_length.size() < 3)
    throw InsufficientDataError("stochastic sewing diagnostic: fewer than 3 window levels above the noise floor");
  const auto fit = fit_line(out.log2_length, out.log2_value);
  out.exponent = fit.slope;
  out.half_width = student_t95(fit.points - 2) * fit.slope_stderr;
  return out;
}

}  // namespace

StochasticSewingDiagnostic stochastic_sewing_diagnostic(const PathGerm& germ, std::size_t paths,
                                                        const TimeGrid& grid, double m,
                                                        std::span<const int> window_levels,
                                                        const TestWeights& weights) {
  if (paths < 1000) {
    std::ostringstream msg;
    msg << "stochastic sewing diagnostic needs at least 1000 paths, got " << paths;
    throw InsufficientDataError(msg.str());
  }
  if (!(m >= 2.0)) throw ParameterError("stochastic sewing diagnostic: m must be >= 2");
  const std::size_t n = grid.steps();
  std::vector<double> lengths, moments, projections;
  double scale = 0.0;
  std::vector<double> phi;
  std::vector<double> d_values(paths);
  for (int level : window_levels) {
    const std::size_t count = std::size_t{1} << level;
    if (level < 0 || n % count != 0 || n / count < 2)
      throw ParameterError("stochastic sewing diagnostic: window level does not split the grid into even windows");
    const std::size_t width = n / count;
    double worst_moment = 0.0, worst_projection = 0.0;
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t k0 = w * width, k2 = k0 + width, k1 = k0 + width / 2;
      double mom = 0.0;
      for (std::size_t i = 0; i < paths; ++i) {
        const double dv = germ(i, k0, k2) - germ(i, k0, k1) - germ(i, k1, k2);
        d_values[i] = dv;
        mom += std::pow(std::abs(dv), m);
        scale = std::max(scale, std::abs(germ(i, k0, k2)));
      }
      worst_moment = std::max(worst_moment, std::pow(mom / static_cast<double>(paths), 1.0 / m));
      std::vector<double> proj;
      for (std::size_t i = 0; i < paths; ++i) {
        if (weights) {
          weights(i, k0, phi);
        } else {
          phi.assign(1, 1.0);
        }
        if (proj.empty()) proj.assign(phi.size(), 0.0);
        for (std::size_t j = 0; j < phi.size(); ++j) proj[j] += phi[j] * d_values[i];
      }
      for (double p : proj) worst_projection = std::max(worst_projection, std::abs(p) / static_cast<double>(paths));
    }
    lengths.push_back(grid.horizon() / static_cast<double>(count));
    moments.push_back(worst_moment);
    projections.push_back(worst_projection);
  }
  const double floor_value = 1e-12 * std::max(scale, 1e-300);
  StochasticSewingDiagnostic out;
  out.moment = fit_scaling(lengths, moments, floor_value);
  out.conditional = fit_scaling(lengths, projections, floor_value);
  return out;
}

YoungSolution nonlinear_young_solve(const AveragedDrift& drift, std::span<const double> y0, const TimeGrid& grid,
                                    double blowup_bound) {
  const std::size_t d = y0.size();
  if (d == 0) throw ParameterError("nonlinear_young_solve: empty initial condition");
  YoungSolution out{Path(grid, d), false, 0, std::nullopt};
  std::copy(y0.begin(), y0.end(), out.path.values.begin());
  std::vector<double> step(d);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const auto x = out.path.at(k);
    drift(grid.node(k), grid.node(k + 1), x, step);
    auto next = out.path.at(k + 1);
    bool bad = false;
    for (std::size_t c = 0; c < d; ++c) {
      next[c] = x[c] + step[c];
      if (!std::isfinite(next[c]) || std::abs(next[c]) > blowup_bound) bad = true;
    }
    if (bad) {
      out.blown_up = true;
      out.first_failure = k + 1;
      return out;
    }
  }
  try {
    out.time_regularity = holder_exponent(out.path.component(0), HolderDirection::time);
  } catch (const InsufficientDataError&) {
  }
  return out;
}

void to_json(nlohmann::json& j, const SewingResult& r) {
  j = nlohmann::json{{"s", r.s},
                     {"t", r.t},
                     {"levels", r.levels()},
                     {"level_sums", r.level_sums},
                     {"level_differences", r.level_differences},
                     {"value", r.value},
                     {"divergent", r.divergent}};
  j["rate"] = r.rate ? nlohmann::json(*r.rate) : nlohmann::json(nullptr);
  j["rate_half_width"] = r.rate_half_width ? nlohmann::json(*r.rate_half_width) : nlohmann::json(nullptr);
  j["extrapolated"] = r.extrapolated ? nlohmann::json(*r.extrapolated) : nlohmann::json(nullptr);
}

}  // namespace noisereg
