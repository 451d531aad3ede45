#pragma once

// Counter-based random numbers.
//
// Every draw is a pure function of (seed, stream tag, object id, element
// index), so results never depend on call order or thread scheduling. The
// block function is Philox4x32-10 (Salmon et al., SC'11).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vulnaug {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kM0, ctr[0], hi0, lo0);
    detail::mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Stream tags keep independent uses of the same (seed, id) apart.
enum class Stream : std::uint32_t {
  coefficient = 1,
  partner = 2,
  oversample = 3,
  synth_rows = 4,
  synth_layout = 5,
  synth_tokens = 6,
  shuffle = 7,
  instance = 8,
};

/// Stateless generator bound to a seed. Each (stream, id, index) triple maps to
/// one 128-bit Philox block.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::uint64_t seed() const noexcept {
    return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
  }

  /// Element index is limited to 56 bits; the top byte carries the stream tag.
  PhiloxCounter block(Stream stream, std::uint64_t id, std::uint64_t index) const noexcept {
    const auto tag = static_cast<std::uint32_t>(stream);
    PhiloxCounter ctr{static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>((index >> 32) & 0x00FFFFFFu) | (tag << 24),
                      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
    return philox4x32_10(ctr, key_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(Stream stream, std::uint64_t id, std::uint64_t index) const noexcept {
    const auto b = block(stream, id, index);
    return to_unit((static_cast<std::uint64_t>(b[0]) << 32) | b[1]);
  }

  /// Uniform double in [lo, hi).
  double uniform(Stream stream, std::uint64_t id, std::uint64_t index, double lo, double hi) const noexcept {
    return lo + (hi - lo) * uniform(stream, id, index);
  }

  /// Uniform integer in [0, bound), bound > 0. Uses the 64-bit multiply-shift
  /// reduction; bias is below 2^-32 for any bound that fits in 32 bits.
  std::uint64_t below(Stream stream, std::uint64_t id, std::uint64_t index, std::uint64_t bound) const noexcept {
    const auto b = block(stream, id, index);
    const std::uint64_t r = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(r) * bound) >> 64);
  }

  bool bernoulli(Stream stream, std::uint64_t id, std::uint64_t index, double p) const noexcept {
    return uniform(stream, id, index) < p;
  }

  /// Standard normal via Box-Muller on the two halves of one block.
  double normal(Stream stream, std::uint64_t id, std::uint64_t index) const noexcept {
    const auto b = block(stream, id, index);
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - to_unit((static_cast<std::uint64_t>(b[0]) << 32) | b[1]);
    const double u2 = to_unit((static_cast<std::uint64_t>(b[2]) << 32) | b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(Stream stream, std::uint64_t id, std::uint64_t index, double mean, double stddev) const noexcept {
    return mean + stddev * normal(stream, id, index);
  }

private:
  static double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  PhiloxKey key_;
};

}  // namespace vulnaug
