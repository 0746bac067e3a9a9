#include "tmle/rng.hpp"

#include <cmath>
#include <numbers>

namespace tmle::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

__extension__ typedef unsigned __int128 uint128;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

Stream::Stream(std::uint64_t seed, std::uint64_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      substream_(substream) {}

std::uint32_t Stream::next32() {
  if (used_ == 4) {
    buffer_ = Philox4x32::block(
        {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
         static_cast<std::uint32_t>(substream_), static_cast<std::uint32_t>(substream_ >> 32)},
        key_);
    ++block_;
    used_ = 0;
  }
  return buffer_[used_++];
}

Stream::result_type Stream::operator()() {
  const std::uint64_t lo = next32();
  const std::uint64_t hi = next32();
  return (hi << 32) | lo;
}

double Stream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Stream::uniform_positive() {
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal(double mean, double sd) {
  const double u1 = uniform_positive();
  const double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Stream::logistic() {
  const double u = uniform_positive();
  return std::log(u / (1.0 - u));
}

std::uint64_t Stream::below(std::uint64_t n) {
  // Lemire's multiply-shift with rejection of the biased low region.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const uint128 m = static_cast<uint128>((*this)()) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

}  // namespace tmle::rng
