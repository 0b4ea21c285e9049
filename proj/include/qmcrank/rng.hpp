#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qmcrank::rng {

// splitmix64 step; used for seed derivation and cheap bit streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic combine of a seed with stream/index tags. Order-sensitive.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a;
  std::uint64_t h = splitmix64(s);
  s = h ^ (b + 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

template <typename... Rest>
std::uint64_t mix(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix(mix(a, b), static_cast<std::uint64_t>(rest)...);
}

// Uniform double in [0,1) from the top 53 bits of a 64-bit word.
inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// mt19937_64-backed stream with explicit value derivations so output is
// identical across platforms (std distributions are implementation-defined).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  double uniform() { return to_unit(gen_()); }

  // Uniform on the 2^-32 grid in [0,1).
  double uniform32() {
    return static_cast<double>(gen_() >> 32) * 0x1.0p-32;
  }

  std::uint32_t bits32() { return static_cast<std::uint32_t>(gen_() >> 32); }

  // Box-Muller; consumes two uniforms per pair, caches the second value.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
    double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform integer in [0, n) by rejection-free scaled draw (n << 2^64).
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qmcrank::rng
