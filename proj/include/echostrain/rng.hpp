#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace echostrain::rng {

// Deterministic counter-free PRNG used everywhere randomness is needed.
// Streams are derived from (seed, tag, frame) so per-frame work can run in
// parallel and still reproduce bit-exactly. Distribution sampling is
// implemented here instead of <random> because the standard distributions
// are not bit-identical across library implementations.

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64, as recommended by its authors.
class Stream {
 public:
  explicit Stream(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_index(uint64_t n) {
    // Multiply-shift bounded draw (Lemire); bias below 2^-64 is irrelevant here
    // and the mapping is fully deterministic.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(m >> 64);
  }

  // Rayleigh(sigma): the standard amplitude model for fully developed speckle.
  double rayleigh(double sigma) {
    double u = uniform();
    return sigma * std::sqrt(-2.0 * std::log1p(-u));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

// Stream tags keep independent uses of the same (seed, frame) decorrelated.
enum class Tag : uint64_t {
  MyoPositions = 1,
  MyoAmplitudes = 2,
  CoherenceMask = 3,
  Background = 4,
  Cavity = 5,
  IncoherentResample = 6,
};

inline Stream substream(uint64_t seed, Tag tag, uint64_t frame = 0) {
  uint64_t sm = seed;
  uint64_t a = splitmix64(sm);
  sm ^= static_cast<uint64_t>(tag) * 0xD6E8FEB86659FD93ull;
  uint64_t b = splitmix64(sm);
  sm ^= (frame + 1) * 0xA0761D6478BD642Full;
  uint64_t c = splitmix64(sm);
  return Stream(a ^ b ^ c);
}

}  // namespace echostrain::rng
