#include "noisereg/rng.hpp"

namespace noisereg {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream ^ splitmix64(substream ^ 0x6A09E667F3BCC909ULL)))) {}

CounterRng::result_type CounterRng::operator()() noexcept {
  ++counter_;
  return splitmix64(key_ + counter_ * kGolden);
}

}  // namespace noisereg
