#pragma once

// Counter-keyed random streams.
//
// Every random quantity is addressed by a tuple of 64-bit keys
// (base seed, replicate, environment position, purpose). A stream is a
// std::mt19937_64 seeded from a SplitMix64 hash of that tuple, so draws never
// depend on how many numbers an unrelated replicate or generation consumed.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace hbre {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a key tuple.
inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc908ull;
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

/// Uniform in [0,1) with 53 random bits.
inline constexpr double bits_to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform in (0,1] with 53 random bits.
inline constexpr double bits_to_unit_pos(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

enum class StreamPurpose : std::uint64_t {
  Environment = 1,
  Offspring = 2,
  Stable = 3,
  Auxiliary = 4,
};

class RandomStream {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  static RandomStream keyed(std::initializer_list<std::uint64_t> keys) { return RandomStream(derive_seed(keys)); }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }
  result_type operator()() { return next_u64(); }
  double uniform() { return bits_to_unit(next_u64()); }
  /// Uniform in (0,1]; safe as an argument to log.
  double uniform_pos() { return bits_to_unit_pos(next_u64()); }
  /// Uniform in (0,1).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential() { return -std::log(uniform_open()); }

  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

/// Identifies one simulated path: its run seed and replicate index.
struct StreamKey {
  std::uint64_t base_seed = 0;
  std::uint64_t replicate = 0;

  /// Stream used to advance the population from environment position `position`.
  RandomStream generation_stream(std::uint64_t position, StreamPurpose purpose = StreamPurpose::Offspring) const {
    return RandomStream::keyed({base_seed, replicate, position, static_cast<std::uint64_t>(purpose)});
  }

  std::uint64_t path_seed() const noexcept { return derive_seed({base_seed, replicate}); }
};

}  // namespace hbre
