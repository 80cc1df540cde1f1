#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every random quantity in the library is a pure function of
//   (seed, stream id, counter)
// so a draw never depends on evaluation order or on how many values some
// other consumer has taken. A `Stream` fixes (seed, stream id); the i-th
// random block of that stream is `stream.block(i)`. Child streams are derived
// with `substream(k)`, which hashes the parent id together with k:
//
//   child.id = splitmix64(parent.id ^ splitmix64(k + 1))
//
// Keys and counters are fixed-width unsigned integers, so the output is
// identical on every platform.

#include <array>
#include <cstdint>
#include <limits>

namespace metricwise {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr void mulhilo32(std::uint32_t a, std::uint32_t b,
                                std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

using Block = std::array<std::uint32_t, 4>;

// Philox4x32 with 10 rounds, as published by Salmon et al. (Random123).
inline constexpr Block philox4x32_10(Block ctr,
                                     std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
    detail::mulhilo32(kM0, ctr[0], hi0, lo0);
    detail::mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

class Stream {
 public:
  constexpr Stream() = default;
  constexpr explicit Stream(std::uint64_t seed, std::uint64_t id = 0) noexcept
      : seed_(seed), id_(id) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }
  constexpr std::uint64_t id() const noexcept { return id_; }

  constexpr Stream substream(std::uint64_t k) const noexcept {
    return Stream(seed_, detail::splitmix64(id_ ^ detail::splitmix64(k + 1)));
  }

  constexpr Block block(std::uint64_t counter) const noexcept {
    return philox4x32_10(
        {static_cast<std::uint32_t>(counter),
         static_cast<std::uint32_t>(counter >> 32),
         static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)},
        {static_cast<std::uint32_t>(seed_),
         static_cast<std::uint32_t>(seed_ >> 32)});
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    const Block b = block(counter);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  // Second independent uniform from the same block.
  constexpr double uniform2(std::uint64_t counter) const noexcept {
    const Block b = block(counter);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(b[2]) << 32) | b[3];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t id_ = 0;
};

// Sequential adaptor over a Stream; satisfies UniformRandomBitGenerator.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(Stream stream) noexcept : stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const Block b = stream_.block(counter_++);
    return (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
  }

  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  Stream stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace metricwise
