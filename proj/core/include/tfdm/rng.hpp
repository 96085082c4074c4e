#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace tfdm {

// All randomness in the library flows through splitmix64 so that runs are
// reproducible from a single u64 seed, independent of platform and of the
// standard library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Order-sensitive combine of two words into a fresh key.
inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// Uniform double in [0, 1) with 53 bits of randomness.
inline double u01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * (1.0 / 9007199254740992.0);
}

// Sequential generator for initialization and shuffling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }
  double next_u01() { return u01(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_u01(); }

  // Box-Muller; consumes two draws per call and throws the pair's second
  // value away so call count stays predictable.
  double normal(double mean, double stddev) {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
    double u2 = next_u01();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    return mean + stddev * z;
  }

  // In-place Fisher-Yates.
  template <typename V>
  void shuffle(V& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::int64_t j = static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Counter-based generator: the value at a given (key, counter) pair is a
// pure function of its inputs, so parallel loops can draw noise for element
// i directly without any shared stream. Used by the dropout layers, keyed on
// (seed, step, layer id, element index), which makes the noise identical
// across repeated probe evaluations at a fixed step.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t s = mix_key(key_, counter);
    return splitmix64(s);
  }

  double uniform01(std::uint64_t counter) const { return u01(bits(counter)); }

  double normal(std::uint64_t counter, double mean, double stddev) const {
    std::uint64_t s = mix_key(key_, counter);
    std::uint64_t b1 = splitmix64(s);
    std::uint64_t b2 = splitmix64(s);
    double u1 = (static_cast<double>(b1 >> 11) + 1.0) * (1.0 / 9007199254740992.0);
    double u2 = u01(b2);
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t key_;
};

// Deterministic epoch permutation of [0, n).
inline std::vector<std::int64_t> shuffled_indices(std::int64_t n, std::uint64_t seed,
                                                  std::int64_t epoch) {
  std::vector<std::int64_t> idx(n);
  for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_key(seed, 0x51ull + static_cast<std::uint64_t>(epoch)));
  rng.shuffle(idx);
  return idx;
}

}  // namespace tfdm
