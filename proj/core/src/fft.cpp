#include "noisereg/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

#include "noisereg/error.hpp"

namespace noisereg {

namespace {

// FFTW's planner is not thread safe; execution of an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwDeleter {
  void operator()(T* p) const noexcept { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter<T>>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const noexcept {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

fftw_plan complex_plan(std::size_t n) {
  std::lock_guard lock(planner_mutex());
  // Cached plans live for the whole process.
  static auto* cache = new std::map<std::size_t, fftw_plan>();
  auto it = cache->find(n);
  if (it != cache->end()) return it->second;
  auto in = fftw_alloc<fftw_complex>(n);
  auto out = fftw_alloc<fftw_complex>(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  if (p == nullptr) throw Error("FFTW failed to plan a complex transform");
  cache->emplace(n, p);
  return p;
}

// Smallest 2^a 3^b 5^c 7^d that is >= n.
std::size_t good_fft_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best *= 2;
  for (std::size_t p7 = 1; p7 <= best; p7 *= 7)
    for (std::size_t p5 = p7; p5 <= best; p5 *= 5)
      for (std::size_t p3 = p5; p3 <= best; p3 *= 3) {
        std::size_t v = p3;
        while (v < n) v *= 2;
        if (v < best) best = v;
      }
  return best;
}

std::size_t ipow(std::size_t base, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace

void fft_forward(std::vector<std::complex<double>>& data) {
  if (data.empty()) return;
  const std::size_t n = data.size();
  fftw_plan plan = complex_plan(n);
  auto in = fftw_alloc<fftw_complex>(n);
  auto out = fftw_alloc<fftw_complex>(n);
  std::memcpy(in.get(), data.data(), n * sizeof(fftw_complex));
  fftw_execute_dft(plan, in.get(), out.get());
  std::memcpy(static_cast<void*>(data.data()), out.get(), n * sizeof(fftw_complex));
}

struct FftConvolver::Impl {
  std::size_t dim;
  std::size_t size_a;
  std::size_t size_b;
  std::size_t out_size;
  std::size_t padded;
  std::size_t real_count;
  std::size_t complex_count;
  Plan forward;
  Plan backward;

  void pad(std::span<const double> src, std::size_t src_size, double* dst) const {
    if (src.size() != ipow(src_size, dim)) throw ParameterError("FftConvolver: operand has the wrong size");
    std::memset(dst, 0, real_count * sizeof(double));
    const std::size_t rows = ipow(src_size, dim - 1);
    for (std::size_t r = 0; r < rows; ++r) {
      // Map row r (multi-index over the first dim-1 axes) into the padded layout.
      std::size_t rem = r, offset = 0, stride = padded;
      for (std::size_t ax = 0; ax + 1 < dim; ++ax) {
        const std::size_t idx = rem % src_size;
        rem /= src_size;
        offset += idx * stride;
        stride *= padded;
      }
      std::memcpy(dst + offset, src.data() + r * src_size, src_size * sizeof(double));
    }
  }

  Spectrum transform(std::span<const double> src, std::size_t src_size) const {
    auto in = fftw_alloc<double>(real_count);
    auto out = fftw_alloc<fftw_complex>(complex_count);
    pad(src, src_size, in.get());
    fftw_execute_dft_r2c(forward.get(), in.get(), out.get());
    Spectrum s;
    s.bins.resize(complex_count);
    std::memcpy(static_cast<void*>(s.bins.data()), out.get(), complex_count * sizeof(fftw_complex));
    return s;
  }

  std::vector<double> product_inverse(const Spectrum& a, const Spectrum& b) const {
    auto prod = fftw_alloc<fftw_complex>(complex_count);
    auto* pc = reinterpret_cast<std::complex<double>*>(prod.get());
    for (std::size_t i = 0; i < complex_count; ++i) pc[i] = a.bins[i] * b.bins[i];
    auto real = fftw_alloc<double>(real_count);
    fftw_execute_dft_c2r(backward.get(), prod.get(), real.get());
    const double scale = 1.0 / static_cast<double>(real_count);
    std::vector<double> result(ipow(out_size, dim));
    const std::size_t rows = ipow(out_size, dim - 1);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t rem = r, offset = 0, stride = padded;
      for (std::size_t ax = 0; ax + 1 < dim; ++ax) {
        const std::size_t idx = rem % out_size;
        rem /= out_size;
        offset += idx * stride;
        stride *= padded;
      }
      for (std::size_t i = 0; i < out_size; ++i) result[r * out_size + i] = real[offset + i] * scale;
    }
    return result;
  }
};

// Layout note: row-major arrays put the last axis fastest. `pad` and
// `product_inverse` treat the fastest axis as contiguous and map the remaining
// axes by their own strides, which is the same convention FFTW uses.

FftConvolver::FftConvolver(std::size_t dim, std::size_t size_a, std::size_t size_b)
    : impl_(std::make_unique<Impl>()) {
  if (dim == 0 || size_a == 0 || size_b == 0) throw ParameterError("FftConvolver: empty operand");
  impl_->dim = dim;
  impl_->size_a = size_a;
  impl_->size_b = size_b;
  impl_->out_size = size_a + size_b - 1;
  impl_->padded = good_fft_size(impl_->out_size);
  impl_->real_count = ipow(impl_->padded, dim);
  impl_->complex_count = ipow(impl_->padded, dim - 1) * (impl_->padded / 2 + 1);

  std::vector<int> n(dim, static_cast<int>(impl_->padded));
  auto in = fftw_alloc<double>(impl_->real_count);
  auto out = fftw_alloc<fftw_complex>(impl_->complex_count);
  std::lock_guard lock(planner_mutex());
  fftw_plan f = fftw_plan_dft_r2c(static_cast<int>(dim), n.data(), in.get(), out.get(), FFTW_ESTIMATE);
  fftw_plan b = fftw_plan_dft_c2r(static_cast<int>(dim), n.data(), out.get(), in.get(), FFTW_ESTIMATE);
  if (f == nullptr || b == nullptr) throw Error("FFTW failed to plan a real convolution");
  impl_->forward.reset(f);
  impl_->backward.reset(b);
}

FftConvolver::~FftConvolver() = default;
FftConvolver::FftConvolver(FftConvolver&&) noexcept = default;
FftConvolver& FftConvolver::operator=(FftConvolver&&) noexcept = default;

std::size_t FftConvolver::dim() const noexcept { return impl_->dim; }
std::size_t FftConvolver::output_size() const noexcept { return impl_->out_size; }
std::size_t FftConvolver::output_count() const noexcept { return ipow(impl_->out_size, impl_->dim); }

FftConvolver::Spectrum FftConvolver::transform_first(std::span<const double> a) const {
  return impl_->transform(a, impl_->size_a);
}

FftConvolver::Spectrum FftConvolver::transform_second(std::span<const double> b) const {
  return impl_->transform(b, impl_->size_b);
}

std::vector<double> FftConvolver::convolve(std::span<const double> a, std::span<const double> b) const {
  return impl_->product_inverse(transform_first(a), transform_second(b));
}

std::vector<double> FftConvolver::convolve(const Spectrum& a_hat, std::span<const double> b) const {
  return impl_->product_inverse(a_hat, transform_second(b));
}

std::vector<double> FftConvolver::convolve(const Spectrum& a_hat, const Spectrum& b_hat) const {
  return impl_->product_inverse(a_hat, b_hat);
}

}  // namespace noisereg
