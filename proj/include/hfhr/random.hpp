#pragma once

#include <concepts>
#include <cstdint>
#include <random>

namespace hfhr {

template <class R>
concept NormalSource = requires(R r) {
  { r.normal() } -> std::convertible_to<double>;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Standard normal stream. Streams for distinct (seed, stream) pairs are
/// decorrelated by hashing both through splitmix64 before seeding the engine.
/// An antithetic source returns the negated values of its partner stream.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0, bool antithetic = false)
      : seed_(seed), stream_(stream), sign_(antithetic ? -1.0 : 1.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)),
                      static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(stream ^ 0xA5A5A5A5ULL)),
                      static_cast<std::uint32_t>(splitmix64(stream ^ 0xA5A5A5A5ULL) >> 32)};
    engine_.seed(seq);
  }

  /// Chain `index` of an ensemble. With `antithetic`, chains 2k and 2k+1 share
  /// stream k and the odd one is negated.
  static RandomSource for_chain(std::uint64_t seed, std::uint64_t index, bool antithetic = false) {
    if (!antithetic) return RandomSource(seed, index);
    return RandomSource(seed, index / 2, (index % 2) == 1);
  }

  double normal() {
    ++draws_;
    return sign_ * dist_(engine_);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  double sign_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

/// Deterministic source for noise-free (mean-map) runs.
struct ZeroNoise {
  std::uint64_t draws = 0;
  double normal() {
    ++draws;
    return 0.0;
  }
};

}  // namespace hfhr
