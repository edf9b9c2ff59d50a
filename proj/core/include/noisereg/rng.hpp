#pragma once

#include <cstdint>
#include <limits>

namespace noisereg {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Counter-based random bit generator keyed by (seed, stream, substream).
///
/// Each key owns an independent SplitMix64 sequence, so ensemble member i and
/// component c can be generated in any order or on any thread without
/// coupling to the others. Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace noisereg
