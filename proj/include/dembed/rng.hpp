#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "dembed/types.hpp"

namespace dembed {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** (Blackman & Vigna). Cheap to seed, which matters because every
/// Monte Carlo trial gets its own engine.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// Independent randomness sources inside one trial. Keeping them apart means
/// that muting a layer or switching detector never shifts the noise draws.
enum class Stream : std::uint64_t { channel = 1, data_high = 2, data_low = 3, noise = 4 };

/// Counter-based derivation: the engine depends only on (master, point, trial, stream),
/// never on which worker runs the trial or in what order.
inline Xoshiro256 trial_stream(std::uint64_t master_seed, std::uint64_t point,
                               std::uint64_t trial, Stream stream) noexcept {
  std::uint64_t state = master_seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ (point * 0xD1B54A32D192ED03ULL);
  h = splitmix64(state);
  state = h ^ (trial * 0xABC98388FB8FAC03ULL);
  h = splitmix64(state);
  state = h ^ (static_cast<std::uint64_t>(stream) * 0x8CB92BA72F3D8DD7ULL);
  return Xoshiro256(splitmix64(state));
}

/// Circularly symmetric complex Gaussian CN(0, variance).
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance = 1.0) : dist_(0.0, std::sqrt(variance / 2.0)) {}

  template <class Rng>
  cplx operator()(Rng& rng) {
    const double re = dist_(rng);
    const double im = dist_(rng);
    return {re, im};
  }

 private:
  std::normal_distribution<double> dist_;
};

}  // namespace dembed
