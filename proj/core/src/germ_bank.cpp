#include "noisereg/germ_bank.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "noisereg/error.hpp"
#include "noisereg/fft.hpp"
#include "noisereg/parallel.hpp"

namespace noisereg {

namespace {

// Windows with at most this many occupied bins skip the FFT.
constexpr std::size_t kDirectBins = 24;

// Multilinear interpolation of values on origin + i*h (size per axis),
// extended by zeros beyond the lattice.
double interpolate(std::span<const double> values, std::size_t dim, double origin, double h, std::size_t size,
                   std::span<const double> x) {
  long base[8];
  double frac[8];
  for (std::size_t a = 0; a < dim; ++a) {
    const double u = (x[a] - origin) / h;
    if (!(u > -1.0 && u < static_cast<double>(size))) return 0.0;
    const double f = std::floor(u);
    base[a] = static_cast<long>(f);
    frac[a] = u - f;
  }
  double acc = 0.0;
  const long n = static_cast<long>(size);
  for (std::size_t corner = 0; corner < (std::size_t{1} << dim); ++corner) {
    double w = 1.0;
    std::size_t flat = 0;
    bool outside = false;
    for (std::size_t a = 0; a < dim; ++a) {
      const bool up = (corner >> a) & 1U;
      w *= up ? frac[a] : 1.0 - frac[a];
      const long idx = base[a] + (up ? 1 : 0);
      if (idx < 0 || idx >= n) outside = true;
      flat = flat * size + static_cast<std::size_t>(std::max(idx, 0L));
    }
    if (!outside && w != 0.0) acc += w * values[flat];
  }
  return acc;
}

}  // namespace

struct LocalTimeAverager::Impl {
  const Path* path;
  std::vector<GridFunction> fields;
  SpatialGrid field_grid;
  SpatialGrid lt_grid;
  FftConvolver conv;
  std::vector<FftConvolver::Spectrum> spectra;
  double out_origin;

  Impl(const Path& p, std::vector<GridFunction> f, SpatialGrid fg, SpatialGrid lg)
      : path(&p),
        fields(std::move(f)),
        field_grid(fg),
        lt_grid(lg),
        conv(fg.dim(), fg.bins(), lg.bins()),
        out_origin(fg.lower() + lg.lower() + fg.width()) {
    for (const auto& g : fields) spectra.push_back(conv.transform_first(g.values));
  }
};

namespace {

SpatialGrid covering_grid(const Path& path, const SpatialGrid& field_grid) {
  double reach = 0.0;
  for (double v : path.values) reach = std::max(reach, std::abs(v));
  const double h = field_grid.width();
  return SpatialGrid::covering(path.dim, reach + 2.0 * h, h);
}

}  // namespace

LocalTimeAverager::LocalTimeAverager(const Path& path, std::vector<GridFunction> fields) {
  if (fields.empty()) throw ParameterError("LocalTimeAverager: need at least one field");
  const SpatialGrid fg = fields.front().grid;
  for (const auto& f : fields) {
    if (!(f.grid == fg)) throw ParameterError("LocalTimeAverager: fields must share one grid");
    if (f.values.size() != fg.total_bins()) throw ParameterError("LocalTimeAverager: field size mismatch");
  }
  if (fg.dim() != path.dim) throw ParameterError("LocalTimeAverager: field and path dimensions differ");
  if (fg.dim() > 8) throw ParameterError("LocalTimeAverager: at most 8 dimensions are supported");
  impl_ = std::make_unique<Impl>(path, std::move(fields), fg, covering_grid(path, fg));
}

LocalTimeAverager::~LocalTimeAverager() = default;
LocalTimeAverager::LocalTimeAverager(LocalTimeAverager&&) noexcept = default;
LocalTimeAverager& LocalTimeAverager::operator=(LocalTimeAverager&&) noexcept = default;

std::size_t LocalTimeAverager::field_count() const noexcept { return impl_->fields.size(); }
const SpatialGrid& LocalTimeAverager::local_time_grid() const noexcept { return impl_->lt_grid; }
const SpatialGrid& LocalTimeAverager::field_grid() const noexcept { return impl_->field_grid; }

LocalTimeAverager::Window LocalTimeAverager::window(std::size_t k0, std::size_t k1) const {
  const auto mu = occupation_measure_nodes(*impl_->path, impl_->lt_grid, k0, k1);
  if (mu.escaped != 0) throw CoverageError("LocalTimeAverager: path left the local-time grid");
  Window w;
  w.owner_ = this;
  for (std::size_t i = 0; i < mu.counts.size(); ++i) {
    if (mu.counts[i] == 0) continue;
    w.bins_.push_back(i);
    w.masses_.push_back(mu.mass(i));
  }
  if (w.bins_.size() > kDirectBins) {
    w.direct_ = false;
    std::vector<double> mass(mu.counts.size());
    for (std::size_t i = 0; i < mass.size(); ++i) mass[i] = mu.mass(i);
    const auto mhat = impl_->conv.transform_second(mass);
    for (const auto& ghat : impl_->spectra) w.lattice_values_.push_back(impl_->conv.convolve(ghat, mhat));
    w.bins_.clear();
    w.masses_.clear();
  }
  return w;
}

double LocalTimeAverager::Window::operator()(std::size_t field, std::span<const double> x) const {
  const auto& impl = *owner_->impl_;
  const std::size_t d = impl.field_grid.dim();
  const double h = impl.field_grid.width();
  if (!direct_) {
    return interpolate(lattice_values_[field], d, impl.out_origin, h, impl.conv.output_size(), x);
  }
  const auto& g = impl.fields[field].values;
  const double g_origin = impl.field_grid.center(0);
  double shifted[8];
  double z[8];
  double acc = 0.0;
  for (std::size_t j = 0; j < bins_.size(); ++j) {
    impl.lt_grid.center(bins_[j], {z, d});
    for (std::size_t a = 0; a < d; ++a) shifted[a] = x[a] - z[a];
    acc += masses_[j] * interpolate(g, d, g_origin, h, impl.field_grid.bins(), {shifted, d});
  }
  return acc;
}

double LocalTimeAverager::evaluate(std::size_t field, std::size_t k0, std::size_t k1,
                                   std::span<const double> x) const {
  return window(k0, k1)(field, x);
}

double GermSums::level_mean(std::size_t q, std::size_t f, std::size_t k, std::span<const std::uint8_t> valid) const {
  double acc = 0.0;
  std::size_t used = 0;
  for (std::size_t p = 0; p < paths; ++p) {
    if (!valid.empty() && valid[p] == 0) continue;
    acc += at(q, f, k, p);
    ++used;
  }
  return used ? acc / static_cast<double>(used) : 0.0;
}

GermSums accumulate_germs(const LocalTimeAverager& averager, const Ensemble& ensemble,
                          std::span<const double> query_times, unsigned threads) {
  const std::size_t n = ensemble.grid.steps();
  if ((n & (n - 1)) != 0) throw ParameterError("accumulate_germs: the step count must be a power of two");
  std::size_t top = 0;
  while ((std::size_t{1} << top) < n) ++top;
  std::vector<std::size_t> query_nodes;
  for (double q : query_times) query_nodes.push_back(ensemble.grid.index_of(q));

  GermSums out;
  out.query_times.assign(query_times.begin(), query_times.end());
  out.fields = averager.field_count();
  out.levels = top + 1;
  out.paths = ensemble.paths;
  out.sums.assign(query_nodes.size() * out.fields * out.levels * out.paths, 0.0);

  for (std::size_t level = 0; level <= top; ++level) {
    const std::size_t count = std::size_t{1} << level;
    const std::size_t width = n / count;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k0 = i * width, k1 = k0 + width;
      std::vector<std::size_t> targets;
      for (std::size_t q = 0; q < query_nodes.size(); ++q) {
        // Only levels whose windows tile [0, q] exactly contribute.
        if (query_nodes[q] % width == 0 && k1 <= query_nodes[q]) targets.push_back(q);
      }
      if (targets.empty()) continue;
      const auto win = averager.window(k0, k1);
      parallel_for(ensemble.paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
          if (!ensemble.valid(p)) continue;
          const auto x = ensemble.state(p, k0);
          for (std::size_t f = 0; f < out.fields; ++f) {
            const double v = win(f, x);
            for (std::size_t q : targets) out.sums[((q * out.fields + f) * out.levels + level) * out.paths + p] += v;
          }
        }
      });
    }
  }
  return out;
}

}  // namespace noisereg
