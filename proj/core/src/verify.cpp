#include "noisereg/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisereg/error.hpp"
#include "noisereg/rng.hpp"
#include "noisereg/sewing.hpp"
#include "noisereg/stats.hpp"

namespace noisereg {

IdentityReport make_report(std::string tag, std::string name, double left, double right, double std_error,
                           double margin, double k_sigma) {
  IdentityReport r{std::move(tag), std::move(name), left, right, std_error, margin, k_sigma, false};
  r.pass = std::isfinite(left) && std::isfinite(right) && std::abs(left - right) <= k_sigma * std_error + margin;
  return r;
}

void to_json(nlohmann::json& j, const IdentityReport& r) {
  j = nlohmann::json{{"tag", r.tag},       {"name", r.name},     {"left", r.left},
                     {"right", r.right},   {"stderr", r.std_error}, {"margin", r.margin},
                     {"k_sigma", r.k_sigma}, {"pass", r.pass}};
}

void write_jsonl(std::ostream& out, std::span<const IdentityReport> reports) {
  for (const auto& r : reports) out << nlohmann::json(r).dump() << '\n';
}

void write_csv(std::ostream& out, std::span<const IdentityReport> reports) {
  out << "check,left,right,stderr,margin,pass\n";
  const auto old = out.precision(17);
  for (const auto& r : reports)
    out << r.tag << ':' << r.name << ',' << r.left << ',' << r.right << ',' << r.std_error << ',' << r.margin << ','
        << (r.pass ? "true" : "false") << '\n';
  out.precision(old);
}

MomentRatio moment_ratio(const Ensemble& ensemble, double m, double gamma0, std::span<const Window> windows,
                         std::size_t bootstrap, std::uint64_t seed) {
  if (!(m >= 2.0)) throw ParameterError("moment_ratio: m must be >= 2");
  if (windows.empty()) throw ParameterError("moment_ratio: empty window set");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < ensemble.paths; ++i)
    if (ensemble.valid(i)) kept.push_back(i);
  if (kept.size() < 2) throw InsufficientDataError("moment_ratio: fewer than two usable paths");

  // table[w * P + p] = |X_{s,t}|^m / |t-s|^{m γ0/2}
  const std::size_t P = kept.size();
  std::vector<double> table(windows.size() * P);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    const double len = ensemble.grid.node(win.k1) - ensemble.grid.node(win.k0);
    const double scale = std::pow(len, -m * gamma0 / 2.0);
    for (std::size_t p = 0; p < P; ++p) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < ensemble.dim; ++c) {
        const double dx = ensemble.state(kept[p], win.k1, c) - ensemble.state(kept[p], win.k0, c);
        r2 += dx * dx;
      }
      table[w * P + p] = std::pow(r2, m / 2.0) * scale;
    }
  }
  auto max_ratio = [&](const std::vector<std::size_t>* idx, std::size_t* arg) {
    double best = -1.0;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      double acc = 0.0;
      if (idx) {
        for (std::size_t p : *idx) acc += table[w * P + p];
      } else {
        for (std::size_t p = 0; p < P; ++p) acc += table[w * P + p];
      }
      acc /= static_cast<double>(P);
      if (acc > best) {
        best = acc;
        if (arg) *arg = w;
      }
    }
    return best;
  };

  MomentRatio out;
  out.m = m;
  out.gamma0 = gamma0;
  out.excluded = ensemble.paths - P;
  std::size_t arg = 0;
  out.ratio = max_ratio(nullptr, &arg);
  out.argmax = windows[arg];
  if (bootstrap >= 2) {
    CounterRng rng(seed, 0x424f4f54ULL);
    std::uniform_int_distribution<std::size_t> pick(0, P - 1);
    std::vector<double> reps;
    std::vector<std::size_t> idx(P);
    for (std::size_t b = 0; b < bootstrap; ++b) {
      for (auto& v : idx) v = pick(rng);
      reps.push_back(max_ratio(&idx, nullptr));
    }
    out.std_error = standard_error(reps) * std::sqrt(static_cast<double>(reps.size()));
  }
  return out;
}

MomentRatioReport moment_ratio_report(std::vector<double> epsilons, std::vector<MomentRatio> ratios, double hurst,
                                      std::size_t dim, double spread_limit) {
  if (epsilons.size() != ratios.size() || ratios.empty())
    throw ParameterError("moment_ratio_report: one ratio per epsilon is required");
  MomentRatioReport r;
  r.m = ratios.front().m;
  r.gamma0 = ratios.front().gamma0;
  const double cap = 1.0 - hurst * static_cast<double>(dim) / 2.0;
  if (!(r.gamma0 < cap)) {
    std::ostringstream msg;
    msg << "gamma0=" << r.gamma0 << " is outside the admissible range gamma0 < 1 - H d/2 = " << cap;
    throw ParameterError(msg.str());
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& x : ratios) {
    lo = std::min(lo, x.ratio);
    hi = std::max(hi, x.ratio);
  }
  r.spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  r.spread_limit = spread_limit;
  const std::size_t n = ratios.size();
  r.rising_tail = n >= 3 && ratios[n - 3].ratio < ratios[n - 2].ratio && ratios[n - 2].ratio < ratios[n - 1].ratio;
  r.bounded = r.spread <= spread_limit && !r.rising_tail;
  r.epsilons = std::move(epsilons);
  r.ratios = std::move(ratios);
  return r;
}

void to_json(nlohmann::json& j, const MomentRatioReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ratios.size(); ++i) {
    const auto& x = r.ratios[i];
    rows.push_back({{"epsilon", r.epsilons[i]},
                    {"ratio", x.ratio},
                    {"stderr", x.std_error},
                    {"argmax_window", {x.argmax.k0, x.argmax.k1}},
                    {"excluded_paths", x.excluded}});
  }
  j = nlohmann::json{{"m", r.m},
                     {"gamma0", r.gamma0},
                     {"ratios", rows},
                     {"spread", r.spread},
                     {"spread_limit", r.spread_limit},
                     {"rising_tail", r.rising_tail},
                     {"bounded", r.bounded}};
}

IdentityReport lebesgue_vs_sewing(const Path& x, const Path& fbm, const MatrixField& g, const SpatialGrid& field_grid,
                                  double s, double t) {
  if (g.rows() != 1 || g.cols() != 1) throw ParameterError("lebesgue_vs_sewing: g must be scalar");
  if (!(x.grid == fbm.grid) || x.dim != fbm.dim) throw ParameterError("lebesgue_vs_sewing: path shapes differ");
  const std::size_t d = x.dim;
  const std::size_t ks = x.grid.index_of(s);
  const std::size_t kt = x.grid.index_of(t);
  const std::size_t nodes = kt - ks;
  if (nodes == 0 || (nodes & (nodes - 1)) != 0)
    throw ParameterError("lebesgue_vs_sewing: the window must span a power-of-two number of steps");
  int levels = 0;
  while ((std::size_t{1} << levels) < nodes) ++levels;
  levels = std::max(levels, 3);
  if ((std::size_t{1} << levels) > nodes) throw ParameterError("lebesgue_vs_sewing: window shorter than 8 steps");

  const double dt = x.grid.dt();
  std::vector<double> y(d);
  const auto gf = g.entry(0, 0);
  double left = 0.0;
  for (std::size_t k = ks; k < kt; ++k) {
    for (std::size_t c = 0; c < d; ++c) y[c] = x(k, c) - fbm(k, c);
    left += gf(y) * dt;
  }

  GridFunction tab{field_grid, g.sample(field_grid)};
  // Binning budget: slope of the tabulated field within two bins of each
  // evaluation point X_r - w_r, integrated along the window.
  const double h = field_grid.width();
  const std::size_t m = field_grid.bins();
  auto slope_near = [&](std::span<const double> p) {
    double worst = 0.0;
    const double lo = field_grid.lower();
    std::vector<long> base(d);
    for (std::size_t a = 0; a < d; ++a) base[a] = static_cast<long>(std::floor((p[a] - lo) / h));
    std::size_t combos = 1;
    for (std::size_t a = 0; a < d; ++a) combos *= 5;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t code = c, flat = 0;
      std::vector<long> idx(d);
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        idx[a] = base[a] + static_cast<long>(code % 5) - 2;
        code /= 5;
        if (idx[a] < 0 || idx[a] >= static_cast<long>(m)) inside = false;
      }
      if (!inside) continue;
      for (std::size_t a = 0; a < d; ++a) flat = flat * m + static_cast<std::size_t>(idx[a]);
      std::size_t stride = 1;
      for (std::size_t a = d; a-- > 0;) {
        if (static_cast<std::size_t>(idx[a]) + 1 < m)
          worst = std::max(worst, std::abs(tab.values[flat + stride] - tab.values[flat]) / h);
        stride *= m;
      }
    }
    return worst;
  };
  double binning = 0.0;
  for (std::size_t k = ks; k < kt; ++k) {
    for (std::size_t c = 0; c < d; ++c) y[c] = x(k, c) - fbm(k, c);
    binning += slope_near(y) * h * std::sqrt(static_cast<double>(d)) * dt;
  }
  const LocalTimeAverager averager(fbm, {tab});
  Germ germ;
  germ.dim = 1;
  germ.eval = [&](double u, double v, std::span<double> out) {
    const std::size_t k0 = x.grid.index_of(u);
    const std::size_t k1 = x.grid.index_of(v);
    out[0] = averager.evaluate(0, k0, k1, x.at(k0));
  };
  const auto result = sew(germ, s, t, levels);
  const double right = result.best()[0];
  const double margin = binning +
                        std::abs(result.best()[0] - result.value[0]) + 1e-9 * (std::abs(right) + 1.0);
  std::ostringstream name;
  name << "[" << s << "," << t << "]";
  return make_report("qv", name.str(), left, right, 0.0, margin, 0.0);
}

namespace {

std::size_t query_index(const GermSums& sums, double t) {
  for (std::size_t q = 0; q < sums.query_times.size(); ++q)
    if (std::abs(sums.query_times[q] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return q;
  std::ostringstream msg;
  msg << "germ sums do not contain query time " << t;
  throw ParameterError(msg.str());
}

double clip(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

IdentityReport ito_isometry_check(const Ensemble& ensemble, std::span<const double> x0, const GermSums& sums,
                                  std::size_t field, double t, std::size_t j, double relative_margin,
                                  double k_sigma) {
  if (j >= ensemble.dim || x0.size() != ensemble.dim) throw ParameterError("ito_isometry_check: bad coordinate");
  const std::size_t q = query_index(sums, t);
  const std::size_t kt = ensemble.grid.index_of(t);
  std::vector<double> a, b;
  for (std::size_t p = 0; p < ensemble.paths; ++p) {
    if (!ensemble.valid(p)) continue;
    const double m = ensemble.state(p, kt, j) - x0[j];
    a.push_back(m * m);
    b.push_back(sums.sewn(q, field, p));
  }
  const auto pm = paired_moments(a, b);
  std::ostringstream name;
  name << "j=" << j + 1 << ",t=" << t;
  return make_report("isometry", name.str(), pm.mean_a, pm.mean_b, pm.stderr_difference,
                     relative_margin * std::abs(pm.mean_b), k_sigma);
}

std::vector<std::pair<std::string, double>> dictionary_v1(const Ensemble& e, std::size_t path, std::size_t ks) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("one", 1.0);
  for (std::size_t j = 0; j < e.dim; ++j) out.emplace_back("clipX" + std::to_string(j + 1), clip(e.state(path, ks, j)));
  std::vector<double> b(e.brownian_dim, 0.0);
  for (std::size_t k = 0; k < ks; ++k)
    for (std::size_t i = 0; i < e.brownian_dim; ++i) b[i] += e.increment(path, k, i);
  for (std::size_t i = 0; i < e.brownian_dim; ++i) out.emplace_back("clipB" + std::to_string(i + 1), clip(b[i]));
  out.emplace_back("clipXhalf*clipX", clip(e.state(path, ks / 2, 0)) * clip(e.state(path, ks, 0)));
  out.emplace_back("clipX*clipB", clip(e.state(path, ks, 0)) * clip(b[0]));
  return out;
}

std::vector<IdentityReport> martingale_residuals(const Ensemble& e, std::span<const double> x0, const GermSums& sums,
                                                 const MartingaleFields& fields,
                                                 std::span<const std::pair<double, double>> pairs, double k_sigma) {
  const std::size_t d = e.dim, n = e.brownian_dim;
  if (fields.quadratic.size() != d || fields.mixed.size() != d * n)
    throw ParameterError("martingale_residuals: field index table has the wrong shape");
  if (x0.size() != d) throw ParameterError("martingale_residuals: x0 has the wrong dimension");
  std::vector<IdentityReport> out;
  for (const auto& [s, t] : pairs) {
    if (!(s > 0.0 && s < t)) throw ParameterError("martingale_residuals: need 0 < s < t");
    const std::size_t ks = e.grid.index_of(s), kt = e.grid.index_of(t);
    const std::size_t qs = query_index(sums, s), qt = query_index(sums, t);
    if (ks % 2 != 0) throw ParameterError("martingale_residuals: s/2 must be a grid node");
    // residual samples keyed by (family, j, i, functional)
    std::vector<std::string> names;
    std::vector<std::vector<double>> samples;
    auto slot = [&](const std::string& key) -> std::vector<double>& {
      for (std::size_t r = 0; r < names.size(); ++r)
        if (names[r] == key) return samples[r];
      names.push_back(key);
      samples.emplace_back();
      return samples.back();
    };
    for (std::size_t p = 0; p < e.paths; ++p) {
      if (!e.valid(p)) continue;
      const auto phi = dictionary_v1(e, p, ks);
      std::vector<double> bs(n, 0.0), bt(n, 0.0);
      for (std::size_t k = 0; k < kt; ++k)
        for (std::size_t i = 0; i < n; ++i) {
          const double inc = e.increment(p, k, i);
          if (k < ks) bs[i] += inc;
          bt[i] += inc;
        }
      for (std::size_t j = 0; j < d; ++j) {
        const double ms = e.state(p, ks, j) - x0[j];
        const double mt = e.state(p, kt, j) - x0[j];
        const double z1 = mt - ms;
        const double z2 = (mt * mt - sums.sewn(qt, fields.quadratic[j], p)) -
                          (ms * ms - sums.sewn(qs, fields.quadratic[j], p));
        for (const auto& [fname, fv] : phi) {
          slot("M/j" + std::to_string(j + 1) + "/" + fname).push_back(fv * z1);
          slot("M2-IA/j" + std::to_string(j + 1) + "/" + fname).push_back(fv * z2);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t f = fields.mixed[i * d + j];
          const double z3 = (mt * bt[i] - sums.sewn(qt, f, p)) - (ms * bs[i] - sums.sewn(qs, f, p));
          for (const auto& [fname, fv] : phi)
            slot("MB-Ia/j" + std::to_string(j + 1) + "i" + std::to_string(i + 1) + "/" + fname).push_back(fv * z3);
        }
      }
    }
    for (std::size_t r = 0; r < names.size(); ++r) {
      std::ostringstream name;
      name << names[r] << "/(" << s << "," << t << ")";
      out.push_back(make_report("martingale", name.str(), mean(samples[r]), 0.0, standard_error(samples[r]), 0.0,
                                k_sigma));
    }
  }
  return out;
}

IdentityReport cross_term_check(const Ensemble& reference, std::span<const double> x0,
                                std::span<const double> integrals, const GermSums& sums, std::size_t field,
                                double t, std::size_t j, double p, double relative_margin, double k_sigma) {
  const std::size_t d = reference.dim;
  if (!(static_cast<double>(d) / p < 1.0)) {
    std::ostringstream msg;
    msg << "cross-term identity needs d/p < 1 (d=" << d << ", p=" << p << ")";
    throw HypothesisError(msg.str());
  }
  if (integrals.size() != reference.paths * d) throw ParameterError("cross_term_check: integral table size mismatch");
  if (j >= d || x0.size() != d) throw ParameterError("cross_term_check: bad coordinate");
  const std::size_t q = query_index(sums, t);
  const std::size_t kt = reference.grid.index_of(t);
  if (kt != reference.grid.steps()) throw ParameterError("cross_term_check: integrals are terminal; t must equal T");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < reference.paths; ++i) {
    if (!reference.valid(i)) continue;
    a.push_back((reference.state(i, kt, j) - x0[j]) * integrals[i * d + j]);
    b.push_back(sums.sewn(q, field, i));
  }
  const auto pm = paired_moments(a, b);
  std::ostringstream name;
  name << "j=" << j + 1 << ",t=" << t;
  return make_report("cross-term", name.str(), pm.mean_a, pm.mean_b, pm.stderr_difference,
                     relative_margin * std::abs(pm.mean_b), k_sigma);
}

}  // namespace noisereg
