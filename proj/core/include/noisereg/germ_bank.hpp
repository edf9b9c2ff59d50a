#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "noisereg/averaging.hpp"
#include "noisereg/occupation.hpp"
#include "noisereg/paths.hpp"
#include "noisereg/solver.hpp"

namespace noisereg {

/// Evaluates germs x -> (g * L_{t_j,t_k})(x) for tabulated scalar fields g
/// against the histogram local time of one frozen path.
///
/// The local-time grid covers the whole path with the bin width of the field
/// grid. Windows occupying few bins are summed directly; larger windows go
/// through one FFT of the occupation masses shared by every field.
class LocalTimeAverager {
 public:
  LocalTimeAverager(const Path& path, std::vector<GridFunction> fields);
  ~LocalTimeAverager();
  LocalTimeAverager(LocalTimeAverager&&) noexcept;
  LocalTimeAverager& operator=(LocalTimeAverager&&) noexcept;

  std::size_t field_count() const noexcept;
  const SpatialGrid& local_time_grid() const noexcept;
  const SpatialGrid& field_grid() const noexcept;

  /// Averaged fields of one node window, ready for repeated point evaluation.
  class Window {
   public:
    double operator()(std::size_t field, std::span<const double> x) const;

   private:
    friend class LocalTimeAverager;
    const LocalTimeAverager* owner_ = nullptr;
    std::vector<std::size_t> bins_;       // direct mode: occupied bins
    std::vector<double> masses_;
    std::vector<std::vector<double>> lattice_values_;  // FFT mode: one lattice per field
    bool direct_ = true;
  };

  Window window(std::size_t k0, std::size_t k1) const;

  /// Single evaluation (g_field * L_{k0,k1})(x).
  double evaluate(std::size_t field, std::size_t k0, std::size_t k1, std::span<const double> x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Per-path dyadic partition sums of local-time germs over [0, q] for a set
/// of query times q.
struct GermSums {
  std::vector<double> query_times;
  std::size_t fields = 0;
  std::size_t levels = 0;  ///< K + 1 where N = 2^K
  std::size_t paths = 0;
  std::vector<double> sums;  ///< [query][field][level][path]; levels coarser than the query are zero

  double at(std::size_t q, std::size_t f, std::size_t k, std::size_t p) const {
    return sums[((q * fields + f) * levels + k) * paths + p];
  }
  /// Finest-level sum, the sewing estimate of (I A)_{0,q}.
  double sewn(std::size_t q, std::size_t f, std::size_t p) const { return at(q, f, levels - 1, p); }
  /// Mean over paths of the level-k sum.
  double level_mean(std::size_t q, std::size_t f, std::size_t k, std::span<const std::uint8_t> valid) const;
};

/// Runs every dyadic window of [0, T] (N a power of two) through the averager
/// and accumulates A_{u,v} = (g * L_{u,v})(X_u) for each ensemble member.
GermSums accumulate_germs(const LocalTimeAverager& averager, const Ensemble& ensemble,
                          std::span<const double> query_times, unsigned threads = 1);

}  // namespace noisereg
