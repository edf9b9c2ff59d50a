#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace noisereg {

/// Uniform time grid t_k = k T / N on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t points() const noexcept { return steps_ + 1; }
  double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }
  double node(std::size_t k) const noexcept;

  /// Index of the node equal to t; throws ParameterError if t is not a node.
  std::size_t index_of(double t) const;

  /// Grid with N / factor steps over the same horizon.
  TimeGrid coarsened(std::size_t factor) const;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double horizon_;
  std::size_t steps_;
};

/// A d-dimensional path sampled on a TimeGrid, stored point-major.
struct Path {
  TimeGrid grid;
  std::size_t dim = 1;
  std::vector<double> values;  // (N + 1) * dim

  Path(TimeGrid g, std::size_t d);
  Path(TimeGrid g, std::size_t d, std::vector<double> v);

  std::size_t points() const noexcept { return grid.steps() + 1; }
  std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
  std::span<double> at(std::size_t k) { return {values.data() + k * dim, dim}; }
  double operator()(std::size_t k, std::size_t c) const { return values[k * dim + c]; }

  /// One component as a contiguous series of N + 1 values.
  std::vector<double> component(std::size_t c) const;

  /// Keeps every factor-th sample.
  Path subsampled(std::size_t factor) const;
};

struct FbmPath {
  double hurst;
  std::uint64_t seed;
  Path path;
};

struct BmPath {
  std::uint64_t seed;
  Path path;
  std::vector<double> increments;  // N * dim, B_{t_{k+1}} - B_{t_k}; path values are their prefix sums
};

enum class FbmMethod { automatic, circulant, cholesky };

struct FbmOptions {
  FbmMethod method = FbmMethod::automatic;
  std::uint64_t stream = 0;  ///< ensemble member index; keys the RNG together with seed
};

/// R(s,t) = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
double fbm_covariance(double hurst, double s, double t);

/// Exact sampler for d-dimensional fBm on a fixed grid.
///
/// The fractional Gaussian noise covariance is embedded in a circulant of size
/// 2N whose eigenvalues are computed once; each sample then costs one complex
/// FFT per component. When the embedding has a materially negative eigenvalue
/// (or Cholesky is requested) the dense Toeplitz covariance is factorised
/// instead.
class FbmGenerator {
 public:
  FbmGenerator(double hurst, std::size_t dim, TimeGrid grid, FbmMethod method = FbmMethod::automatic);
  ~FbmGenerator();
  FbmGenerator(FbmGenerator&&) noexcept;
  FbmGenerator& operator=(FbmGenerator&&) noexcept;

  FbmPath sample(std::uint64_t seed, std::uint64_t stream = 0) const;

  /// Method actually in use after the embedding check.
  FbmMethod method() const noexcept;
  /// Most negative circulant eigenvalue relative to the largest (0 if none).
  double embedding_defect() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

FbmPath generate_fbm(double hurst, std::size_t dim, const TimeGrid& grid, std::uint64_t seed,
                     FbmOptions options = {});

BmPath generate_bm(std::size_t dim, const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream = 0);

/// CSV: a `# H=..., seed=..., N=..., T=...` comment line, then `t,w_1,..,w_d`.
void write_csv(std::ostream& out, const FbmPath& path);
void write_csv(std::ostream& out, const BmPath& path);

}  // namespace noisereg
