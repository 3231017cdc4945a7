#ifndef TSKETCH_RANDOM_HPP
#define TSKETCH_RANDOM_HPP

#include <array>
#include <cstdint>
#include <string_view>

namespace tsketch {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Each (key, counter) pair maps to four independent 32-bit words, so any
/// entry of a random matrix can be drawn without touching the others.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Counter operator()(Counter counter) const noexcept;

 private:
  Key key_;
};

/// Keyed stream of uniforms and normals addressed by a 64-bit index.
/// `stream` separates independent uses of the same key.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint32_t stream = 0) noexcept
      : philox_(key), stream_(stream) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t index) const noexcept;
  /// Standard normal via Box-Muller on the two uniforms at `index`.
  double normal(std::uint64_t index) const noexcept;
  std::uint64_t bits(std::uint64_t index) const noexcept;

 private:
  Philox4x32::Counter block(std::uint64_t index) const noexcept;

  Philox4x32 philox_;
  std::uint32_t stream_;
};

/// SplitMix64 finalizer. A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed for a named purpose. For a fixed master and tag, distinct (a, b)
/// with a, b < 2^24 give distinct seeds: the code is injective and mix64 is
/// a bijection.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t a = 0,
                          std::uint64_t b = 0) noexcept;

}  // namespace tsketch

#endif  // TSKETCH_RANDOM_HPP
