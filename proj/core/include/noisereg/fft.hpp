#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace noisereg {

/// In-place forward DFT (sign -1) of a complex 1-D sequence.
void fft_forward(std::vector<std::complex<double>>& data);

/// Linear convolution of two real d-dimensional hypercube arrays by FFT with
/// zero padding, so there is never any wraparound.
///
/// Arrays are row-major with `size_a` (resp. `size_b`) points per axis; the
/// result has size_a + size_b - 1 points per axis. The transform of the first
/// operand can be cached and reused against many second operands.
class FftConvolver {
 public:
  FftConvolver(std::size_t dim, std::size_t size_a, std::size_t size_b);
  ~FftConvolver();
  FftConvolver(FftConvolver&&) noexcept;
  FftConvolver& operator=(FftConvolver&&) noexcept;

  struct Spectrum {
    std::vector<std::complex<double>> bins;
  };

  std::size_t dim() const noexcept;
  std::size_t output_size() const noexcept;  ///< points per axis
  std::size_t output_count() const noexcept;  ///< output_size^dim

  Spectrum transform_first(std::span<const double> a) const;
  Spectrum transform_second(std::span<const double> b) const;
  std::vector<double> convolve(std::span<const double> a, std::span<const double> b) const;
  std::vector<double> convolve(const Spectrum& a_hat, std::span<const double> b) const;
  std::vector<double> convolve(const Spectrum& a_hat, const Spectrum& b_hat) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace noisereg
