#include "tsketch/random.hpp"

#include <cmath>
#include <numbers>

namespace tsketch {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53U;
constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

inline double to_unit(std::uint32_t lo, std::uint32_t hi) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return static_cast<double>(bits >> 11) * kTwoPow53Inv;
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const noexcept {
  Key key = key_;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

Philox4x32::Counter CounterRng::block(std::uint64_t index) const noexcept {
  return philox_({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                  stream_, 0U});
}

std::uint64_t CounterRng::bits(std::uint64_t index) const noexcept {
  const auto w = block(index);
  return (static_cast<std::uint64_t>(w[1]) << 32) | w[0];
}

double CounterRng::uniform(std::uint64_t index) const noexcept {
  const auto w = block(index);
  return to_unit(w[0], w[1]);
}

double CounterRng::normal(std::uint64_t index) const noexcept {
  const auto w = block(index);
  const double u1 = 1.0 - to_unit(w[0], w[1]);  // (0, 1]
  const double u2 = to_unit(w[2], w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t a,
                          std::uint64_t b) noexcept {
  const std::uint64_t base = mix64(master ^ fnv1a(tag));
  const std::uint64_t code = ((a & 0xFFFFFFULL) << 24) | (b & 0xFFFFFFULL);
  return mix64(base + code);
}

}  // namespace tsketch
