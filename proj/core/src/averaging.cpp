#include "noisereg/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "noisereg/error.hpp"
#include "noisereg/fft.hpp"
#include "noisereg/stats.hpp"

namespace noisereg {

GridFunction sample_on_grid(const ScalarFunction& f, const SpatialGrid& grid) {
  GridFunction out{grid, std::vector<double>(grid.total_bins())};
  std::vector<double> z(grid.dim());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    grid.center(i, z);
    out.values[i] = f(z);
  }
  return out;
}

std::size_t Lattice::total() const noexcept {
  std::size_t n = 1;
  for (std::size_t a = 0; a < dim; ++a) n *= size;
  return n;
}

double AveragedField::operator()(std::span<const double> x) const {
  const std::size_t d = lattice.dim;
  if (lattice.size == 0) return 0.0;
  std::vector<std::size_t> base(d);
  std::vector<double> frac(d);
  for (std::size_t a = 0; a < d; ++a) {
    const double u = (x[a] - lattice.origin) / lattice.spacing;
    const double top = static_cast<double>(lattice.size - 1);
    if (!(u >= 0.0 && u <= top)) return 0.0;
    if (lattice.size == 1) {
      base[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    auto i = static_cast<std::size_t>(std::floor(u));
    if (i >= lattice.size - 1) i = lattice.size - 2;
    base[a] = i;
    frac[a] = u - static_cast<double>(i);
  }
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    bool skip = false;
    for (std::size_t a = 0; a < d; ++a) {
      const bool up = (corner >> a) & 1U;
      weight *= up ? frac[a] : 1.0 - frac[a];
      const std::size_t idx = base[a] + (up ? 1 : 0);
      if (idx >= lattice.size) skip = true;
      flat = flat * lattice.size + idx;
    }
    if (!skip && weight != 0.0) acc += weight * values[flat];
  }
  return acc;
}

std::vector<double> average_direct(const ScalarFunction& f, const Path& path, double s, double t,
                                   std::span<const double> probes) {
  const std::size_t d = path.dim;
  if (probes.size() % d != 0) throw ParameterError("average_direct: probe coordinates not a multiple of dim");
  const std::size_t k0 = path.grid.index_of(s);
  const std::size_t k1 = path.grid.index_of(t);
  if (k0 > k1) throw ParameterError("average_direct: window must satisfy s <= t");
  const double dt = path.grid.dt();
  const std::size_t count = probes.size() / d;
  std::vector<double> out(count, 0.0);
  std::vector<double> y(d);
  for (std::size_t q = 0; q < count; ++q) {
    double acc = 0.0;
    for (std::size_t k = k0; k < k1; ++k) {
      const auto w = path.at(k);
      for (std::size_t a = 0; a < d; ++a) y[a] = probes[q * d + a] - w[a];
      acc += f(y);
    }
    out[q] = acc * dt;
  }
  return out;
}

AveragedField average_via_local_time(const GridFunction& f, const LocalTimeField& local_time,
                                     double max_escaped_fraction) {
  const auto& fg = f.grid;
  const auto& lg = local_time.grid();
  if (fg.dim() != lg.dim()) throw ParameterError("average_via_local_time: grid dimensions differ");
  const double h = fg.width();
  if (std::abs(h - lg.width()) > 1e-12 * h) {
    std::ostringstream msg;
    msg << "average_via_local_time: bin widths differ (" << h << " vs " << lg.width() << ")";
    throw ParameterError(msg.str());
  }
  if (f.values.size() != fg.total_bins()) throw ParameterError("average_via_local_time: field size mismatch");
  const double escaped = local_time.escaped_fraction();
  if (escaped > max_escaped_fraction) {
    std::ostringstream msg;
    msg << "local-time box misses " << escaped * 100.0 << "% of the window (limit " << max_escaped_fraction * 100.0
        << "%); enlarge the spatial grid";
    throw CoverageError(msg.str());
  }
  const auto& mu = local_time.measure;
  std::vector<double> mass(mu.counts.size());
  for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = mu.mass(i);

  AveragedField out;
  out.s = local_time.s();
  out.t = local_time.t();
  out.lattice = Lattice{fg.dim(), fg.lower() + lg.lower() + h, h, fg.bins() + lg.bins() - 1};
  FftConvolver conv(fg.dim(), fg.bins(), lg.bins());
  out.values = conv.convolve(f.values, mass);
  return out;
}

void write_csv(std::ostream& out, const AveragedField& field) {
  const auto& lat = field.lattice;
  for (std::size_t a = 0; a < lat.dim; ++a) out << "x_" << (a + 1) << ',';
  out << "value\n";
  const auto old = out.precision(17);
  std::vector<std::size_t> idx(lat.dim);
  for (std::size_t flat = 0; flat < field.values.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t a = lat.dim; a-- > 0;) {
      idx[a] = rem % lat.size;
      rem /= lat.size;
    }
    for (std::size_t a = 0; a < lat.dim; ++a) out << lat.node(idx[a]) << ',';
    out << field.values[flat] << '\n';
  }
  out.precision(old);
}

HolderEstimate holder_exponent(std::span<const double> samples, HolderDirection direction,
                               const HolderOptions& options) {
  if (samples.size() < 2) throw InsufficientDataError("holder_exponent: need at least two samples");
  const std::size_t n = samples.size() - 1;  // number of unit-lag increments
  const int top = static_cast<int>(std::floor(std::log2(static_cast<double>(n))));
  const int lo = options.min_log2;
  int hi = options.max_log2 >= 0 ? options.max_log2 : std::max(top - 5, lo + 3);
  if (lo < 0 || hi < lo) throw ParameterError("holder_exponent: invalid dyadic scale range");
  // Every scale needs at least two disjoint increments.
  if ((std::size_t{1} << hi) * 2 > n || hi - lo + 1 < 4) {
    std::ostringstream msg;
    msg << "holder_exponent: " << n << " increments do not support 4 dyadic scales from lag 2^" << lo;
    throw InsufficientDataError(msg.str());
  }

  double vmax = 0.0;
  for (double v : samples) vmax = std::max(vmax, std::abs(v));
  const double floor_value = options.noise_floor >= 0.0 ? options.noise_floor : 1e-12 * vmax;

  HolderEstimate est;
  const std::size_t lag_max = std::size_t{1} << hi;
  const std::size_t per_offset = n / lag_max;  // equal count of increments at every lag
  const std::size_t stride = n / per_offset;
  for (int j = lo; j <= hi; ++j) {
    const std::size_t lag = std::size_t{1} << j;
    double sup = 0.0;
    if (direction == HolderDirection::space) {
      for (std::size_t i = 0; i + lag <= n; ++i) sup = std::max(sup, std::abs(samples[i + lag] - samples[i]));
    } else {
      double total = 0.0;
      for (std::size_t o = 0; o < stride; ++o) {
        double m = 0.0;
        for (std::size_t k = 0; k < per_offset; ++k) {
          const std::size_t i = o + k * stride;
          if (i + lag > n) break;
          m = std::max(m, std::abs(samples[i + lag] - samples[i]));
        }
        total += m;
      }
      sup = total / static_cast<double>(stride);
    }
    if (sup > floor_value) {
      est.log2_lag.push_back(static_cast<double>(j));
      est.log2_sup.push_back(std::log2(sup));
    }
  }
  if (est.log2_lag.empty()) {
    est.degenerate = true;
    est.half_width = std::numeric_limits<double>::infinity();
    return est;
  }
  if (est.log2_lag.size() < 4) {
    std::ostringstream msg;
    msg << "holder_exponent: only " << est.log2_lag.size() << " scales rise above the noise floor";
    throw InsufficientDataError(msg.str());
  }
  const auto fit = fit_line(est.log2_lag, est.log2_sup);
  est.exponent = fit.slope;
  est.half_width = student_t95(fit.points - 2) * fit.slope_stderr;
  return est;
}

namespace {

void check_hurst_and_p(double hurst, double p) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw ParameterError("Hurst parameter must lie in (0,1)");
  if (!(p >= 1.0)) throw ParameterError("integrability exponent p must be >= 1");
}

}  // namespace

double RegularityBudget::gamma_max(double lambda) const noexcept {
  const auto d = static_cast<double>(dim);
  const double spatial = variant == RegularityVariant::I ? d / 2.0 : d / p;
  return 1.0 - (lambda + spatial) * hurst;
}

RegularityBudget admissible_regularity(double hurst, std::size_t dim, double p, RegularityVariant variant) {
  check_hurst_and_p(hurst, p);
  if (dim == 0) throw ParameterError("dimension must be positive");
  const auto d = static_cast<double>(dim);
  RegularityBudget b{hurst, dim, p, variant, 0.0};
  if (variant == RegularityVariant::I) {
    if (hurst * d >= 1.0) {
      std::ostringstream msg;
      msg << "variant I needs H < 1/d (H=" << hurst << ", d=" << dim << ")";
      throw HypothesisError(msg.str());
    }
    b.lambda_max = 1.0 / (2.0 * hurst) - d / std::min(p, 2.0);
  } else {
    b.lambda_max = 1.0 / (2.0 * hurst) - d / p;
  }
  return b;
}

double hurst_admissible_main(std::size_t dim, double p) {
  const auto d = static_cast<double>(dim);
  if (dim == 0) throw ParameterError("dimension must be positive");
  if (!(p >= 2.0) || d / p >= 1.0) {
    std::ostringstream msg;
    msg << "admissibility needs p >= 2 and d/p < 1 (d=" << dim << ", p=" << p << ")";
    throw HypothesisError(msg.str());
  }
  return 0.5 / (1.0 + d / std::min(p / 2.0, 4.0 / 3.0));
}

double hurst_admissible_fbm_driver(double hurst_driver, std::size_t dim, double p) {
  if (!(hurst_driver > 0.5 && hurst_driver < 1.0)) {
    std::ostringstream msg;
    msg << "driver Hurst index must lie in (1/2, 1), got " << hurst_driver;
    throw HypothesisError(msg.str());
  }
  if (dim == 0) throw ParameterError("dimension must be positive");
  if (!(p >= 1.0)) throw ParameterError("integrability exponent p must be >= 1");
  return (hurst_driver - 0.5) / (2.0 + static_cast<double>(dim) / p);
}

void to_json(nlohmann::json& j, const RegularityBudget& b) {
  j = nlohmann::json{{"H", b.hurst},
                     {"d", b.dim},
                     {"p", b.p},
                     {"variant", b.variant == RegularityVariant::I ? "I" : "II"},
                     {"lambda_max", b.lambda_max},
                     {"gamma_max_at_lambda_1", b.gamma_max(1.0)},
                     {"gamma_max_at_lambda_0", b.gamma_max(0.0)}};
}

}  // namespace noisereg
