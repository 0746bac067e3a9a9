#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace tmle::rng {

// Philox4x32-10 counter-based block function (Salmon et al., Random123).
// Output depends only on (counter, key), so any draw of any substream can be
// produced without touching the others.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn purpose names into stream tags.
constexpr std::uint64_t tag(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Child seed for a named purpose or an index below `seed`.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t child) {
  return splitmix64(splitmix64(seed) ^ splitmix64(child + 0x632BE59BD9B4E019ULL));
}
constexpr std::uint64_t derive(std::uint64_t seed, std::string_view purpose) {
  return derive(seed, tag(purpose));
}

// Substream (seed, index): the key is the seed, the upper half of the
// counter is the substream index and the lower half counts blocks.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint64_t substream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_positive();
  double uniform(double lower, double upper) { return lower + (upper - lower) * uniform(); }
  double normal(double mean = 0.0, double sd = 1.0);
  double logistic();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint32_t next32();

  Philox4x32::Key key_;
  std::uint64_t substream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buffer_{};
  unsigned used_ = 4;
};

}  // namespace tmle::rng
