#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace sdpg::rng {

// Counter-based random numbers: every draw is a pure function of a 64-bit
// key, so streams are reproducible independent of calling order and thread
// scheduling. splitmix64 is the mixer.

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ull)); }

inline uint64_t mix(std::initializer_list<uint64_t> keys) {
  uint64_t h = 0x8f1bbcdcbfa53e0bull;
  for (uint64_t k : keys) h = mix(h, k);
  return h;
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform01(uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1]; safe as a log argument.
inline double uniform01_open(uint64_t key) {
  return static_cast<double>((splitmix64(key) >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two derived keys.
inline double normal(uint64_t key) {
  const double u1 = uniform01_open(mix(key, 0x1234));
  const double u2 = uniform01(mix(key, 0x5678));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double uniform_range(uint64_t key, double lo, double hi) {
  return lo + (hi - lo) * uniform01(key);
}

// Sequential convenience stream for places where draw order is inherently
// serial (initialization, shuffles, episode resets).
class Stream {
 public:
  explicit Stream(uint64_t key) : key_(key) {}

  uint64_t next_key() { return mix(key_, counter_++); }
  double uniform() { return uniform01(next_key()); }
  double uniform(double lo, double hi) { return uniform_range(next_key(), lo, hi); }
  double normal() { return rng::normal(next_key()); }
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return splitmix64(next_key()) % n; }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace sdpg::rng
