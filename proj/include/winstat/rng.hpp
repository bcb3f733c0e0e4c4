#pragma once

#include <cstdint>
#include <random>

#include "winstat/normal.hpp"

// Deterministic random numbers. std::mt19937_64's output sequence is
// fixed by the standard, and the uniform and normal mappings below avoid
// std::*_distribution (whose algorithms are implementation-defined), so
// streams are reproducible across compilers and platforms.

namespace winstat {

// splitmix64 finalizer; used to derive independent-looking substream
// seeds from (base seed, stream index).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ mix64(stream + 0x632be59bd9b4e019ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0,1): 53 random bits, offset half a step.
  double uniform() {
    const std::uint64_t bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1p-53;
  }

  double normal() { return norm_quantile(uniform()); }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace winstat
