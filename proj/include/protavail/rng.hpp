#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace protavail {

// Seed derivation. Every random quantity in a world is drawn from its own
// stream, so dropping a mode from a model never perturbs the draws of the
// modes that remain (common random numbers).
//
//   replication_seed(base, i) = mix64(base ^ mix64(i + kGolden))
//   stream_seed(rep, tag, j)  = mix64(rep ^ mix64((tag << 48) ^ j ^ kStreamSalt))
//
// mix64 is the SplitMix64 finalizer. Streams are SplitMix64 generators
// started at the derived seed. Both are fixed; changing them changes every
// report byte.
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kStreamSalt = 0xd1b54a32d192ed03ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t replication_seed(std::uint64_t base_seed,
                                         std::uint64_t replication) noexcept {
  return mix64(base_seed ^ mix64(replication + kGolden));
}

enum class StreamTag : std::uint64_t {
  mode = 1,        // natural occurrence/repair alternation of one mode
  arrival = 2,     // Poisson arrivals of one event
  damage = 3,      // repair durations of damage-induced manifestations
  inspection = 4,  // detection coin flips
  resample = 5,    // continuation draws after a conditioning time
};

constexpr std::uint64_t stream_seed(std::uint64_t rep_seed, StreamTag tag,
                                    std::uint64_t index) noexcept {
  return mix64(rep_seed ^
               mix64((static_cast<std::uint64_t>(tag) << 48) ^ index ^ kStreamSalt));
}

// SplitMix64; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform on the open interval (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
  }

  // Strictly positive exponential variate. std::exponential_distribution is
  // avoided because its algorithm is implementation-defined.
  double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

 private:
  std::uint64_t state_;
};

}  // namespace protavail
