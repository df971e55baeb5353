#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pms::rng {

// splitmix64; used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seed for stream `stream` of a master seed. Streams derived
// from distinct (master, stream) pairs are independent for our purposes.
inline std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL + (stream << 1));
  splitmix64(s);
  return splitmix64(s);
}

// Uniform double in [0, 1). Avoids std::uniform_real_distribution, whose
// output is implementation-defined; this mapping is reproducible everywhere.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Inverse-CDF sample from an unnormalized-but-summing-to-one categorical.
inline int sample_categorical(const double* probs, int n, std::mt19937_64& gen) {
  double u = uniform01(gen);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return n - 1;  // guard against rounding at the top end
}

// Standard normal via Box-Muller (no cached spare, so draws are a pure
// function of generator state).
inline double gaussian(std::mt19937_64& gen) {
  double u1 = uniform01(gen);
  double u2 = uniform01(gen);
  while (u1 <= 0.0) u1 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace pms::rng
