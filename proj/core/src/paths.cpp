#include "noisereg/paths.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <ostream>
#include <random>
#include <sstream>

#include "noisereg/error.hpp"
#include "noisereg/fft.hpp"
#include "noisereg/rng.hpp"

namespace noisereg {

TimeGrid::TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("TimeGrid: horizon must be positive");
  if (steps < 1) throw ParameterError("TimeGrid: need at least one step");
}

double TimeGrid::node(std::size_t k) const noexcept {
  if (k >= steps_) return horizon_;
  return static_cast<double>(k) * dt();
}

std::size_t TimeGrid::index_of(double t) const {
  const double x = t / dt();
  const double k = std::round(x);
  if (k < 0.0 || k > static_cast<double>(steps_) || std::abs(x - k) > 1e-9) {
    std::ostringstream msg;
    msg << "time " << t << " is not a node of the grid (T=" << horizon_ << ", N=" << steps_ << ")";
    throw ParameterError(msg.str());
  }
  return static_cast<std::size_t>(k);
}

TimeGrid TimeGrid::coarsened(std::size_t factor) const {
  if (factor == 0 || steps_ % factor != 0) throw ParameterError("TimeGrid: factor must divide the step count");
  return TimeGrid(horizon_, steps_ / factor);
}

Path::Path(TimeGrid g, std::size_t d) : grid(g), dim(d), values((g.steps() + 1) * d, 0.0) {
  if (d == 0) throw ParameterError("Path: dimension must be positive");
}

Path::Path(TimeGrid g, std::size_t d, std::vector<double> v) : grid(g), dim(d), values(std::move(v)) {
  if (d == 0) throw ParameterError("Path: dimension must be positive");
  if (values.size() != (g.steps() + 1) * d) throw ParameterError("Path: value count does not match grid");
}

std::vector<double> Path::component(std::size_t c) const {
  std::vector<double> out(points());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (*this)(k, c);
  return out;
}

Path Path::subsampled(std::size_t factor) const {
  Path out(grid.coarsened(factor), dim);
  for (std::size_t k = 0; k < out.points(); ++k)
    for (std::size_t c = 0; c < dim; ++c) out.values[k * dim + c] = (*this)(k * factor, c);
  return out;
}

double fbm_covariance(double hurst, double s, double t) {
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(std::abs(s), h2) + std::pow(std::abs(t), h2) - std::pow(std::abs(t - s), h2));
}

namespace {

// Autocovariance of unit-step fractional Gaussian noise at lag k.
double fgn_autocovariance(double hurst, double k) {
  const double h2 = 2.0 * hurst;
  return 0.5 * (std::pow(std::abs(k + 1.0), h2) - 2.0 * std::pow(std::abs(k), h2) + std::pow(std::abs(k - 1.0), h2));
}

void check_hurst(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) {
    std::ostringstream msg;
    msg << "Hurst parameter must lie in (0,1), got " << hurst;
    throw ParameterError(msg.str());
  }
}

}  // namespace

struct FbmGenerator::Impl {
  double hurst;
  std::size_t dim;
  TimeGrid grid;
  FbmMethod method;
  double defect = 0.0;
  std::vector<double> sqrt_eigen;  // circulant: sqrt(lambda_k / m)
  Eigen::MatrixXd cholesky;        // lower factor of the fGn covariance

  void build_circulant() {
    const std::size_t n = grid.steps();
    const std::size_t m = 2 * n;
    std::vector<std::complex<double>> c(m);
    for (std::size_t k = 0; k <= n; ++k) c[k] = fgn_autocovariance(hurst, static_cast<double>(k));
    for (std::size_t k = n + 1; k < m; ++k) c[k] = c[m - k];
    fft_forward(c);
    double lmax = 0.0, lmin = 0.0;
    for (const auto& z : c) {
      lmax = std::max(lmax, z.real());
      lmin = std::min(lmin, z.real());
    }
    defect = lmax > 0.0 ? -lmin / lmax : 1.0;
    sqrt_eigen.resize(m);
    for (std::size_t k = 0; k < m; ++k)
      sqrt_eigen[k] = std::sqrt(std::max(c[k].real(), 0.0) / static_cast<double>(m));
  }

  void build_cholesky() {
    const std::size_t n = grid.steps();
    Eigen::MatrixXd cov(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        cov(i, j) = fgn_autocovariance(hurst, static_cast<double>(i) - static_cast<double>(j));
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "Cholesky factorisation of the fGn covariance failed (H=" << hurst << ", N=" << n
          << ", min diagonal=" << cov.diagonal().minCoeff() << ")";
      throw GenerationError(msg.str());
    }
    cholesky = llt.matrixL();
    const double min_pivot = cholesky.diagonal().minCoeff();
    if (!(min_pivot > 1e-10)) {
      std::ostringstream msg;
      msg << "fGn covariance is numerically singular (H=" << hurst << ", N=" << n << ", smallest pivot=" << min_pivot
          << ")";
      throw GenerationError(msg.str());
    }
  }

  // Unit-step fGn for one component.
  std::vector<double> noise(std::uint64_t seed, std::uint64_t stream, std::size_t component) const {
    const std::size_t n = grid.steps();
    CounterRng rng(seed, stream, component);
    std::normal_distribution<double> normal;
    std::vector<double> out(n);
    if (method == FbmMethod::circulant) {
      const std::size_t m = sqrt_eigen.size();
      std::vector<std::complex<double>> z(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        z[k] = sqrt_eigen[k] * std::complex<double>(re, im);
      }
      fft_forward(z);
      for (std::size_t k = 0; k < n; ++k) out[k] = z[k].real();
    } else {
      Eigen::VectorXd g(n);
      for (std::size_t k = 0; k < n; ++k) g[k] = normal(rng);
      const Eigen::VectorXd x = cholesky.triangularView<Eigen::Lower>() * g;
      for (std::size_t k = 0; k < n; ++k) out[k] = x[k];
    }
    return out;
  }
};

FbmGenerator::FbmGenerator(double hurst, std::size_t dim, TimeGrid grid, FbmMethod method)
    : impl_(std::make_unique<Impl>(Impl{hurst, dim, grid, method, 0.0, {}, {}})) {
  check_hurst(hurst);
  if (dim == 0) throw ParameterError("fBm dimension must be positive");
  if (method != FbmMethod::cholesky) {
    impl_->build_circulant();
    // Eigenvalues within rounding of zero are harmless; anything larger means
    // the embedding is not a valid covariance.
    if (impl_->defect > 1e-10) {
      if (method == FbmMethod::circulant) {
        std::ostringstream msg;
        msg << "circulant embedding is not nonnegative definite (relative defect " << impl_->defect << ")";
        throw GenerationError(msg.str());
      }
      impl_->method = FbmMethod::cholesky;
    } else {
      impl_->method = FbmMethod::circulant;
    }
  }
  if (impl_->method == FbmMethod::cholesky) impl_->build_cholesky();
}

FbmGenerator::~FbmGenerator() = default;
FbmGenerator::FbmGenerator(FbmGenerator&&) noexcept = default;
FbmGenerator& FbmGenerator::operator=(FbmGenerator&&) noexcept = default;

FbmMethod FbmGenerator::method() const noexcept { return impl_->method; }
double FbmGenerator::embedding_defect() const noexcept { return impl_->defect; }

FbmPath FbmGenerator::sample(std::uint64_t seed, std::uint64_t stream) const {
  const auto& g = impl_->grid;
  const std::size_t d = impl_->dim;
  const double scale = std::pow(g.dt(), impl_->hurst);
  Path path(g, d);
  for (std::size_t c = 0; c < d; ++c) {
    const auto noise = impl_->noise(seed, stream, c);
    double acc = 0.0;
    for (std::size_t k = 0; k < g.steps(); ++k) {
      acc += scale * noise[k];
      path.values[(k + 1) * d + c] = acc;
    }
  }
  return FbmPath{impl_->hurst, seed, std::move(path)};
}

FbmPath generate_fbm(double hurst, std::size_t dim, const TimeGrid& grid, std::uint64_t seed, FbmOptions options) {
  return FbmGenerator(hurst, dim, grid, options.method).sample(seed, options.stream);
}

BmPath generate_bm(std::size_t dim, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
  if (dim == 0) throw ParameterError("Brownian dimension must be positive");
  const std::size_t n = grid.steps();
  const double sd = std::sqrt(grid.dt());
  BmPath out{seed, Path(grid, dim), std::vector<double>(n * dim)};
  // The substream offset keeps Brownian keys disjoint from fBm keys that share a seed.
  constexpr std::uint64_t kBrownianSubstream = 0x42524F574E000000ULL;
  for (std::size_t c = 0; c < dim; ++c) {
    CounterRng rng(seed, stream, kBrownianSubstream + c);
    std::normal_distribution<double> normal;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double inc = sd * normal(rng);
      out.increments[k * dim + c] = inc;
      acc += inc;
      out.path.values[(k + 1) * dim + c] = acc;
    }
  }
  return out;
}

namespace {

void write_rows(std::ostream& out, const Path& p) {
  out << "t";
  for (std::size_t c = 0; c < p.dim; ++c) out << ",w_" << (c + 1);
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t k = 0; k < p.points(); ++k) {
    out << p.grid.node(k);
    for (std::size_t c = 0; c < p.dim; ++c) out << ',' << p(k, c);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace

void write_csv(std::ostream& out, const FbmPath& path) {
  out << "# H=" << path.hurst << ", seed=" << path.seed << ", N=" << path.path.grid.steps()
      << ", T=" << path.path.grid.horizon() << '\n';
  write_rows(out, path.path);
}

void write_csv(std::ostream& out, const BmPath& path) {
  out << "# H=0.5, seed=" << path.seed << ", N=" << path.path.grid.steps() << ", T=" << path.path.grid.horizon()
      << '\n';
  write_rows(out, path.path);
}

}  // namespace noisereg
