#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qmcrank/detail/joe_kuo_data.hpp"
#include "qmcrank/errors.hpp"
#include "qmcrank/rng.hpp"

namespace qmcrank::lowdisc {

enum class SequenceKind { MC, Halton, SobolScrambled };

inline const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::MC: return "MC";
    case SequenceKind::Halton: return "Halton";
    case SequenceKind::SobolScrambled: return "SobolScrambled";
  }
  return "?";
}

// N x d block of numbers in [0,1), row-major. Immutable after creation.
struct PointSet {
  std::size_t n = 0;
  std::size_t d = 0;
  SequenceKind kind = SequenceKind::MC;
  std::uint64_t seed = 0;
  std::vector<double> values;  // n*d entries

  double at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * d, d};
  }
};

// Non-power-of-two QMC sample counts forfeit the usual error guarantees;
// generate() reports that through this hook instead of failing.
inline std::function<void(const std::string&)>& warning_handler() {
  static std::function<void(const std::string&)> handler =
      [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  return handler;
}

constexpr std::size_t kMaxSobolDim = 1111;
constexpr int kSobolBits = 32;

namespace detail {

struct JoeKuoEntry {
  std::uint32_t s = 0;
  std::uint32_t a = 0;
  std::uint32_t m[18] = {};
};

// Parses the embedded Joe-Kuo table once. Entry i holds dimension i+2.
inline const std::vector<JoeKuoEntry>& joe_kuo_entries() {
  static const std::vector<JoeKuoEntry> entries = [] {
    std::vector<JoeKuoEntry> out;
    out.reserve(kMaxSobolDim - 1);
    std::istringstream in(qmcrank::detail::joe_kuo_table_text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 'd') continue;
      std::istringstream ls(line);
      std::uint32_t dim;
      JoeKuoEntry e;
      ls >> dim >> e.s >> e.a;
      for (std::uint32_t i = 0; i < e.s; ++i) ls >> e.m[i];
      out.push_back(e);
    }
    return out;
  }();
  return entries;
}

// 32-bit direction vectors, v[dim][bit], built per Joe-Kuo's recurrence.
inline const std::vector<std::array<std::uint32_t, 32>>& direction_vectors() {
  static const std::vector<std::array<std::uint32_t, 32>> table = [] {
    const auto& entries = joe_kuo_entries();
    std::vector<std::array<std::uint32_t, 32>> v(entries.size() + 1);
    if (v.size() != kMaxSobolDim)
      throw std::runtime_error("direction-number table truncated");
    for (int i = 0; i < kSobolBits; ++i) v[0][i] = 1u << (31 - i);
    for (std::size_t dim = 1; dim < v.size(); ++dim) {
      const JoeKuoEntry& e = entries[dim - 1];
      const std::uint32_t s = e.s;
      if (s >= kSobolBits) {
        for (int i = 0; i < kSobolBits; ++i) v[dim][i] = e.m[i] << (31 - i);
        continue;
      }
      for (std::uint32_t i = 0; i < s; ++i) v[dim][i] = e.m[i] << (31 - i);
      for (std::uint32_t i = s; i < kSobolBits; ++i) {
        std::uint32_t x = v[dim][i - s] ^ (v[dim][i - s] >> s);
        for (std::uint32_t k = 1; k < s; ++k)
          if ((e.a >> (s - 1 - k)) & 1u) x ^= v[dim][i - k];
        v[dim][i] = x;
      }
    }
    return v;
  }();
  return table;
}

inline void check_nd(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0)
    throw std::invalid_argument("point set needs n >= 1 and d >= 1");
}

inline bool is_power_of_two(std::size_t n) { return std::has_single_bit(n); }

// First d primes, grown on demand.
inline std::vector<std::uint32_t> first_primes(std::size_t d) {
  std::vector<std::uint32_t> primes;
  primes.reserve(d);
  std::uint32_t c = 2;
  while (primes.size() < d) {
    bool prime = true;
    for (std::uint32_t p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
    ++c;
  }
  return primes;
}

inline bool is_prime(std::uint64_t b) {
  if (b < 2) return false;
  for (std::uint64_t p = 2; p * p <= b; ++p)
    if (b % p == 0) return false;
  return true;
}

}  // namespace detail

// Base-b radical inverse: digits of `index` mirrored about the radix point.
inline double halton_radical_inverse(std::uint64_t index, std::uint32_t base) {
  if (!detail::is_prime(base))
    throw std::invalid_argument("radical inverse base must be prime, got " +
                                std::to_string(base));
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

// Halton sequence from index 1 (index 0 is the all-zeros point), no
// randomization. Dimension j uses the j-th prime as base.
inline PointSet halton_raw(std::size_t n, std::size_t d,
                           std::uint64_t start_index = 1) {
  detail::check_nd(n, d);
  const auto primes = detail::first_primes(d);
  PointSet ps{n, d, SequenceKind::Halton, 0, std::vector<double>(n * d)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      ps.values[i * d + j] = halton_radical_inverse(start_index + i, primes[j]);
  return ps;
}

// Classical Sobol sequence (Gray-code order) from the bundled Joe-Kuo
// direction numbers. Deterministic and seed-independent; the first point is
// the all-zeros point.
inline PointSet sobol_raw(std::size_t n, std::size_t d) {
  detail::check_nd(n, d);
  if (d > kMaxSobolDim)
    throw unsupported_dimension("Sobol dimension " + std::to_string(d) +
                                " exceeds bundled table (max " +
                                std::to_string(kMaxSobolDim) + ")");
  const auto& v = detail::direction_vectors();
  PointSet ps{n, d, SequenceKind::SobolScrambled, 0,
              std::vector<double>(n * d)};
  std::vector<std::uint32_t> x(d, 0);
  for (std::size_t j = 0; j < d; ++j) ps.values[j] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const int c = std::countr_one(static_cast<std::uint64_t>(i - 1));
    for (std::size_t j = 0; j < d; ++j) {
      x[j] ^= v[j][c];
      ps.values[i * d + j] = static_cast<double>(x[j]) * 0x1.0p-32;
    }
  }
  return ps;
}

// Linear matrix scrambling plus a random digital shift, per dimension.
// Preserves the dyadic-net structure of the input; marginals become uniform
// in expectation over seeds. Deterministic per seed.
inline PointSet scramble(const PointSet& raw, std::uint64_t seed) {
  detail::check_nd(raw.n, raw.d);
  PointSet out{raw.n, raw.d, SequenceKind::SobolScrambled, seed,
               std::vector<double>(raw.n * raw.d)};
  std::vector<std::uint32_t> rows(32);
  for (std::size_t j = 0; j < raw.d; ++j) {
    std::uint64_t state = rng::mix(seed, 0x53435241u, j);
    // Lower-triangular random matrix with unit diagonal, digit 1 = bit 31.
    for (int k = 0; k < 32; ++k) {
      const std::uint32_t rand_bits =
          static_cast<std::uint32_t>(rng::splitmix64(state) >> 32);
      rows[k] = (1u << (31 - k)) | (rand_bits & ~(0xffffffffu >> k));
    }
    const std::uint32_t shift =
        static_cast<std::uint32_t>(rng::splitmix64(state) >> 32);
    for (std::size_t i = 0; i < raw.n; ++i) {
      const std::uint32_t x =
          static_cast<std::uint32_t>(raw.values[i * raw.d + j] * 0x1.0p32);
      std::uint32_t y = 0;
      for (int k = 0; k < 32; ++k)
        y |= static_cast<std::uint32_t>(std::popcount(x & rows[k]) & 1)
             << (31 - k);
      out.values[i * raw.d + j] = static_cast<double>(y ^ shift) * 0x1.0p-32;
    }
  }
  return out;
}

// Uniform points on [0,1)^d from one of the three generators. Deterministic
// in (kind, n, d, seed); all coordinates live on the 2^-32 grid.
inline PointSet generate(SequenceKind kind, std::size_t n, std::size_t d,
                         std::uint64_t seed) {
  detail::check_nd(n, d);
  if (kind != SequenceKind::MC && !detail::is_power_of_two(n))
    warning_handler()(std::string(to_string(kind)) + " sample count " +
                      std::to_string(n) +
                      " is not a power of two; QMC error guarantees need n = 2^k");
  switch (kind) {
    case SequenceKind::MC: {
      PointSet ps{n, d, kind, seed, std::vector<double>(n * d)};
      rng::Stream stream(seed);
      for (double& v : ps.values) v = stream.uniform32();
      return ps;
    }
    case SequenceKind::Halton: {
      // Random-start randomization: seeded offset into the sequence.
      const std::uint64_t offset = rng::mix(seed, 0x48414c54u) % (1u << 20);
      PointSet ps = halton_raw(n, d, 1 + offset);
      ps.seed = seed;
      return ps;
    }
    case SequenceKind::SobolScrambled:
      return scramble(sobol_raw(n, d), seed);
  }
  throw std::invalid_argument("unknown sequence kind");
}

}  // namespace qmcrank::lowdisc
