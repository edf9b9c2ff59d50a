#include "noisereg/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "noisereg/error.hpp"
#include "noisereg/fft.hpp"

namespace noisereg {

namespace {

// Combinators evaluate their operands into stack buffers of this size.
constexpr std::size_t kMaxEntries = 64;

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

}  // namespace

MatrixField::MatrixField(std::size_t dim, std::size_t rows, std::size_t cols, Oracle oracle, FieldInfo info)
    : dim_(dim), rows_(rows), cols_(cols), oracle_(std::move(oracle)), info_(std::move(info)) {
  if (dim == 0 || rows == 0 || cols == 0) throw ParameterError("MatrixField: dimensions must be positive");
  if (rows * cols > kMaxEntries) throw ParameterError("MatrixField: at most 64 entries are supported");
  if (!oracle_) throw ParameterError("MatrixField: missing oracle");
}

std::vector<double> MatrixField::operator()(std::span<const double> x) const {
  std::vector<double> out(entries());
  oracle_(x, out);
  return out;
}

std::vector<double> MatrixField::sample(const SpatialGrid& grid) const {
  if (grid.dim() != dim_) throw ParameterError("MatrixField::sample: grid dimension differs");
  const std::size_t e = entries();
  std::vector<double> out(grid.total_bins() * e);
  std::vector<double> z(dim_);
  for (std::size_t i = 0; i < grid.total_bins(); ++i) {
    grid.center(i, z);
    oracle_(z, {out.data() + i * e, e});
  }
  return out;
}

ScalarFunction MatrixField::entry(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw ParameterError("MatrixField::entry: index out of range");
  const std::size_t idx = r * cols_ + c;
  const std::size_t e = entries();
  return [oracle = oracle_, idx, e](std::span<const double> x) {
    double buf[kMaxEntries];
    oracle(x, {buf, e});
    return buf[idx];
  };
}

MatrixField constant_identity(std::size_t dim, double c) {
  return MatrixField(
      dim, dim, dim,
      [dim, c](std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = c;
        return false;
      },
      FieldInfo{c == 1.0 ? "identity" : "scaled identity", std::nullopt, std::nullopt, false});
}

MatrixField constant_matrix(std::size_t dim, std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw ParameterError("constant_matrix: value count does not match shape");
  return MatrixField(
      dim, rows, cols,
      [values = std::move(values)](std::span<const double>, std::span<double> out) {
        std::copy(values.begin(), values.end(), out.begin());
        return false;
      },
      FieldInfo{"constant", std::nullopt, std::nullopt, false});
}

MatrixField linear_combination(double a, const MatrixField& f, double b, const MatrixField& g) {
  if (f.dim() != g.dim() || f.rows() != g.rows() || f.cols() != g.cols())
    throw ParameterError("linear_combination: field shapes differ");
  FieldInfo info;
  info.name = "combination";
  if (f.info().support_radius && g.info().support_radius)
    info.support_radius = std::max(*f.info().support_radius, *g.info().support_radius);
  if (f.info().lp_threshold || g.info().lp_threshold)
    info.lp_threshold = std::min(f.info().lp_threshold.value_or(std::numeric_limits<double>::infinity()),
                                 g.info().lp_threshold.value_or(std::numeric_limits<double>::infinity()));
  info.singular_at_origin = f.info().singular_at_origin || g.info().singular_at_origin;
  const std::size_t e = f.entries();
  return MatrixField(
      f.dim(), f.rows(), f.cols(),
      [a, b, f, g, e](std::span<const double> x, std::span<double> out) {
        double fb[kMaxEntries], gb[kMaxEntries];
        const bool cf = f.evaluate(x, {fb, e});
        const bool cg = g.evaluate(x, {gb, e});
        for (std::size_t i = 0; i < e; ++i) out[i] = a * fb[i] + b * gb[i];
        return cf || cg;
      },
      std::move(info));
}

MatrixField lattice_field(std::size_t dim, std::size_t rows, std::size_t cols, double origin, double spacing,
                          std::size_t size, std::vector<double> values, FieldInfo info) {
  const std::size_t e = rows * cols;
  std::size_t total = 1;
  for (std::size_t a = 0; a < dim; ++a) total *= size;
  if (values.size() != total * e) throw ParameterError("lattice_field: value count does not match lattice");
  if (size < 2 || !(spacing > 0.0)) throw ParameterError("lattice_field: need at least two nodes per axis");
  if (dim > 8) throw ParameterError("lattice_field: at most 8 dimensions are supported");
  auto data = std::make_shared<const std::vector<double>>(std::move(values));
  return MatrixField(
      dim, rows, cols,
      [dim, e, origin, spacing, size, data](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        std::size_t base[8];
        double frac[8];
        const double top = static_cast<double>(size - 1);
        for (std::size_t a = 0; a < dim; ++a) {
          const double u = (x[a] - origin) / spacing;
          if (!(u >= 0.0 && u <= top)) return false;
          auto i = static_cast<std::size_t>(u);
          if (i >= size - 1) i = size - 2;
          base[a] = i;
          frac[a] = u - static_cast<double>(i);
        }
        const auto& v = *data;
        for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
          double w = 1.0;
          std::size_t flat = 0;
          for (std::size_t a = 0; a < dim; ++a) {
            const bool up = (corner >> a) & 1U;
            w *= up ? frac[a] : 1.0 - frac[a];
            flat = flat * size + base[a] + (up ? 1 : 0);
          }
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < e; ++c) out[c] += w * v[flat * e + c];
        }
        return false;
      },
      std::move(info));
}

SingularExampleInfo singular_example_info(double gamma, double radius, std::size_t dim) {
  if (!(gamma >= 0.0)) throw ParameterError("singular example: gamma must be >= 0");
  if (!(radius > 0.0)) throw ParameterError("singular example: K must be positive");
  if (dim == 0) throw ParameterError("singular example: dimension must be positive");
  const auto d = static_cast<double>(dim);
  const double threshold = gamma > 0.0 ? d / gamma : std::numeric_limits<double>::infinity();
  return SingularExampleInfo{gamma, radius, dim, threshold, gamma < 1.0, 2.0 < threshold};
}

MatrixField singular_example(double gamma, double radius, std::size_t dim) {
  const auto ex = singular_example_info(gamma, radius, dim);
  std::ostringstream name;
  name << "singular(gamma=" << gamma << ",K=" << radius << ",d=" << dim << ")";
  FieldInfo info{name.str(), radius, std::nullopt, gamma > 0.0};
  if (gamma > 0.0) info.lp_threshold = ex.lp_threshold;
  return MatrixField(
      dim, dim, dim,
      [gamma, radius, dim](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double r = norm2(x.first(dim));
        if (r > radius) return false;
        bool clamped = false;
        double v;
        if (gamma == 0.0) {
          v = 1.0;
        } else if (r == 0.0) {
          v = kSingularClamp;
          clamped = true;
        } else {
          v = std::min(std::pow(r, -gamma), kSingularClamp);
        }
        for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = v;
        return clamped;
      },
      std::move(info));
}

double MollifierSpec::kernel(double r, std::size_t dim) {
  if (r >= 1.0) return 0.0;
  const double half_d = static_cast<double>(dim) / 2.0;
  // ∫_{B(0,1)} (1 - |x|^2)^3 dx = π^{d/2} Γ(4) / Γ(4 + d/2)
  const double mass = std::pow(std::numbers::pi, half_d) * 6.0 / std::tgamma(4.0 + half_d);
  const double u = 1.0 - r * r;
  return u * u * u / mass;
}

double MollifierSpec::cutoff(double r) const {
  const double inner = 0.5 / epsilon;
  const double outer = 1.0 / epsilon;
  if (r <= inner) return 1.0;
  if (r >= outer) return 0.0;
  const double u = (r - inner) / (outer - inner);
  const double a = std::exp(-1.0 / u);
  const double b = std::exp(-1.0 / (1.0 - u));
  return b / (a + b);
}

double MollifierSpec::scaled_kernel(double r, std::size_t dim) const {
  return kernel(r / epsilon, dim) / std::pow(epsilon, static_cast<double>(dim));
}

MatrixField mollify(const MatrixField& field, const MollifierSpec& spec, const SpatialGrid& grid) {
  const double eps = spec.epsilon;
  if (!(eps > 0.0)) throw ParameterError("mollify: epsilon must be positive");
  if (grid.dim() != field.dim()) throw ParameterError("mollify: grid dimension differs from the field");
  const double h = grid.width();
  if (h > eps / 4.0 * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "mollify: bin width " << h << " does not resolve the kernel (need h <= eps/4 = " << eps / 4.0 << ")";
    throw ResolutionError(msg.str());
  }
  const double reach = std::min(field.info().support_radius.value_or(std::numeric_limits<double>::infinity()),
                                1.0 / eps);
  if (grid.lower() > -reach || grid.upper() < reach) {
    std::ostringstream msg;
    msg << "mollify: grid box [" << grid.lower() << ", " << grid.upper() << "] does not contain B(0, " << reach
        << ")";
    throw ParameterError(msg.str());
  }
  const std::size_t d = field.dim();
  const std::size_t e = field.entries();
  const std::size_t m = grid.bins();

  std::vector<double> cut(grid.total_bins() * e);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < grid.total_bins(); ++i) {
    grid.center(i, z);
    const double phi = spec.cutoff(norm2(z));
    if (phi == 0.0) continue;
    field.evaluate(z, {cut.data() + i * e, e});
    for (std::size_t c = 0; c < e; ++c) cut[i * e + c] *= phi;
  }

  const auto r = static_cast<std::size_t>(std::floor(eps / h));
  const std::size_t ksize = 2 * r + 1;
  std::size_t ktotal = 1;
  for (std::size_t a = 0; a < d; ++a) ktotal *= ksize;
  std::vector<double> kernel(ktotal);
  double ksum = 0.0;
  for (std::size_t flat = 0; flat < ktotal; ++flat) {
    std::size_t rem = flat;
    double rr = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double off = (static_cast<double>(rem % ksize) - static_cast<double>(r)) * h;
      rr += off * off;
      rem /= ksize;
    }
    kernel[flat] = spec.scaled_kernel(std::sqrt(rr), d);
    ksum += kernel[flat];
  }
  for (double& k : kernel) k /= ksum;

  FftConvolver conv(d, ksize, m);
  const auto khat = conv.transform_first(kernel);
  const std::size_t out_size = conv.output_size();
  const std::size_t out_total = conv.output_count();
  std::vector<double> values(out_total * e);
  std::vector<double> component(grid.total_bins());
  for (std::size_t c = 0; c < e; ++c) {
    for (std::size_t i = 0; i < grid.total_bins(); ++i) component[i] = cut[i * e + c];
    const auto smooth = conv.convolve(khat, component);
    for (std::size_t i = 0; i < out_total; ++i) values[i * e + c] = smooth[i];
  }
  // Enforce supp σ_ε ⊂ B(0, reach + ε) for the interpolant: every node a query
  // beyond that radius touches lies within h sqrt(d) of it. This also clears
  // FFT round-off outside the support.
  const double origin = grid.center(0) - static_cast<double>(r) * h;
  const double keep = reach + eps - h * std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < out_total; ++i) {
    std::size_t rem = i;
    double rr = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double x = origin + static_cast<double>(rem % out_size) * h;
      rr += x * x;
      rem /= out_size;
    }
    if (std::sqrt(rr) > keep)
      for (std::size_t c = 0; c < e; ++c) values[i * e + c] = 0.0;
  }

  std::ostringstream name;
  name << "mollified(" << field.info().name << ",eps=" << eps << ")";
  FieldInfo info{name.str(), reach + eps, std::nullopt, false};
  return lattice_field(d, field.rows(), field.cols(), origin, h, out_size, std::move(values), std::move(info));
}

MatrixField hs_norm_sq(const MatrixField& field) {
  FieldInfo info = field.info();
  info.name = "hs_norm_sq(" + info.name + ")";
  if (info.lp_threshold) *info.lp_threshold /= 2.0;
  const std::size_t e = field.entries();
  return MatrixField(
      field.dim(), 1, 1,
      [field, e](std::span<const double> x, std::span<double> out) {
        double buf[kMaxEntries];
        const bool clamped = field.evaluate(x, {buf, e});
        double s = 0.0;
        for (std::size_t i = 0; i < e; ++i) s += buf[i] * buf[i];
        out[0] = s;
        return clamped;
      },
      std::move(info));
}

namespace {

struct CornerQuadrature {
  const MatrixField& field;
  double p;
  std::size_t dim;

  double integrand(std::span<const double> x) const {
    double buf[kMaxEntries];
    field.evaluate(x, {buf, field.entries()});
    return std::pow(norm2({buf, field.entries()}), p);
  }

  // ∫ over the cube with one corner at the origin, side `side`, extending in
  // the directions given by `sign`. Sub-cubes away from the origin use the
  // midpoint rule; the corner cube is split again, `depth` times.
  double integrate(std::span<const double> sign, double side, int depth, std::vector<double>& shells) const {
    double total = 0.0;
    std::vector<double> x(dim);
    double cell = side;
    for (int level = 0; level < depth; ++level) {
      const double half = cell / 2.0;
      const double vol = std::pow(half, static_cast<double>(dim));
      double shell = 0.0;
      for (std::size_t corner = 1; corner < (std::size_t{1} << dim); ++corner) {
        for (std::size_t a = 0; a < dim; ++a) {
          const bool far = (corner >> a) & 1U;
          x[a] = sign[a] * (far ? 1.5 * half : 0.5 * half);
        }
        shell += integrand(x) * vol;
      }
      shells[static_cast<std::size_t>(level)] += shell;
      total += shell;
      cell = half;
    }
    return total;
  }
};

}  // namespace

LpNorm lp_norm(const MatrixField& field, double p, const SpatialGrid& grid) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ParameterError("lp_norm: p must lie in [1, inf)");
  if (grid.dim() != field.dim()) throw ParameterError("lp_norm: grid dimension differs from the field");
  const std::size_t d = field.dim();
  const double h = grid.width();
  const double vol = grid.cell_volume();
  LpNorm out;
  const CornerQuadrature quad{field, p, d};

  const bool refine = field.info().singular_at_origin;
  std::size_t origin_axis_bin = 0;
  if (refine) {
    const double k = -grid.lower() / h;
    if (std::abs(k - std::round(k)) > 1e-9 || k <= 0.0 || k >= static_cast<double>(grid.bins())) {
      throw ParameterError("lp_norm: a field singular at the origin needs a grid with the origin on a bin corner");
    }
    origin_axis_bin = static_cast<std::size_t>(std::round(k));  // bins origin_axis_bin - 1 and origin_axis_bin touch 0
  }

  double sum = 0.0;
  std::vector<double> z(d);
  for (std::size_t i = 0; i < grid.total_bins(); ++i) {
    if (refine) {
      std::size_t rem = i;
      bool touches = true;
      for (std::size_t a = 0; a < d; ++a) {
        const std::size_t idx = rem % grid.bins();
        rem /= grid.bins();
        if (idx + 1 != origin_axis_bin && idx != origin_axis_bin) touches = false;
      }
      if (touches) continue;
    }
    grid.center(i, z);
    sum += quad.integrand(z) * vol;
  }

  if (refine) {
    constexpr int kDepth = 40;
    std::vector<double> shells(kDepth, 0.0);
    std::vector<double> sign(d);
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
      for (std::size_t a = 0; a < d; ++a) sign[a] = ((corner >> a) & 1U) ? 1.0 : -1.0;
      sum += quad.integrate(sign, h, kDepth, shells);
    }
    const std::size_t n = shells.size();
    if (shells[n - 1] >= shells[n - 2] && shells[n - 2] >= shells[n - 3] && shells[n - 1] > 0.0) {
      out.integrability_warning = true;
      out.warning = "refined contributions near the singularity do not shrink; the field is not integrable at this p";
    }
  }
  if (!field.in_lp(p)) {
    out.integrability_warning = true;
    if (out.warning.empty()) {
      std::ostringstream msg;
      msg << "field is tagged as not in L^" << p << " (threshold " << *field.info().lp_threshold << ")";
      out.warning = msg.str();
    }
  }
  out.value = std::pow(sum, 1.0 / p);
  return out;
}

void write_csv(std::ostream& out, const MatrixField& field, const SpatialGrid& grid) {
  for (std::size_t a = 0; a < field.dim(); ++a) out << "x_" << (a + 1) << ',';
  for (std::size_t r = 0; r < field.rows(); ++r)
    for (std::size_t c = 0; c < field.cols(); ++c)
      out << "s_" << (r + 1) << (c + 1) << (r + 1 == field.rows() && c + 1 == field.cols() ? "\n" : ",");
  const auto values = field.sample(grid);
  const std::size_t e = field.entries();
  const auto old = out.precision(17);
  std::vector<double> z(field.dim());
  for (std::size_t i = 0; i < grid.total_bins(); ++i) {
    grid.center(i, z);
    for (double v : z) out << v << ',';
    for (std::size_t c = 0; c < e; ++c) out << values[i * e + c] << (c + 1 == e ? '\n' : ',');
  }
  out.precision(old);
}

}  // namespace noisereg
