#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>
#include <thread>
#include <vector>

#include "qmcrank/lowdisc.hpp"
#include "sobol_reference.hpp"

using namespace qmcrank;
using lowdisc::PointSet;
using lowdisc::SequenceKind;

namespace {

// Brute-force digit reversal with exact integer arithmetic; the independent
// oracle for the radical inverse.
double digit_reversal_oracle(std::uint64_t index, std::uint64_t base) {
  std::vector<std::uint64_t> digits;
  while (index > 0) {
    digits.push_back(index % base);
    index /= base;
  }
  double num = 0.0, denom = 1.0;
  for (std::uint64_t d : digits) {
    num = num * static_cast<double>(base) + static_cast<double>(d);
    denom *= static_cast<double>(base);
  }
  return num / denom;
}

bool one_point_per_dyadic_interval(const PointSet& ps, std::size_t column) {
  std::vector<int> counts(ps.n, 0);
  for (std::size_t i = 0; i < ps.n; ++i) {
    const auto bucket =
        static_cast<std::size_t>(ps.at(i, column) * static_cast<double>(ps.n));
    if (bucket >= ps.n) return false;
    ++counts[bucket];
  }
  return std::all_of(counts.begin(), counts.end(),
                     [](int c) { return c == 1; });
}

// Exact star discrepancy in two dimensions: the supremum over anchored boxes
// is attained at corners built from point coordinates (open evaluation) or
// approached from outside them (closed evaluation).
double star_discrepancy_2d(const PointSet& ps) {
  REQUIRE(ps.d == 2);
  const std::size_t n = ps.n;
  std::vector<double> ux(n), uy(n);
  for (std::size_t i = 0; i < n; ++i) {
    ux[i] = ps.at(i, 0);
    uy[i] = ps.at(i, 1);
  }
  std::sort(ux.begin(), ux.end());
  std::sort(uy.begin(), uy.end());
  ux.erase(std::unique(ux.begin(), ux.end()), ux.end());
  uy.erase(std::unique(uy.begin(), uy.end()), uy.end());
  const std::size_t U = ux.size(), V = uy.size();

  std::vector<std::uint32_t> prefix((U + 1) * (V + 1), 0);
  auto P = [&](std::size_t a, std::size_t b) -> std::uint32_t& {
    return prefix[a * (V + 1) + b];
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto ix = static_cast<std::size_t>(
        std::lower_bound(ux.begin(), ux.end(), ps.at(i, 0)) - ux.begin());
    const auto iy = static_cast<std::size_t>(
        std::lower_bound(uy.begin(), uy.end(), ps.at(i, 1)) - uy.begin());
    ++P(ix + 1, iy + 1);
  }
  for (std::size_t a = 1; a <= U; ++a)
    for (std::size_t b = 1; b <= V; ++b)
      P(a, b) += P(a - 1, b) + P(a, b - 1) - P(a - 1, b - 1);

  std::vector<double> vx(ux), vy(uy);
  vx.push_back(1.0);
  vy.push_back(1.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < vx.size(); ++i) {
    const std::size_t si = i, ci = std::min(i + 1, U);
    for (std::size_t j = 0; j < vy.size(); ++j) {
      const std::size_t sj = j, cj = std::min(j + 1, V);
      const double vol = vx[i] * vy[j];
      worst = std::max(worst, P(ci, cj) * inv_n - vol);
      worst = std::max(worst, vol - P(si, sj) * inv_n);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("radical inverse matches digit-reversal oracle") {
  CHECK(lowdisc::halton_radical_inverse(0, 2) == 0.0);
  CHECK(lowdisc::halton_radical_inverse(1, 2) == 0.5);
  CHECK_THAT(lowdisc::halton_radical_inverse(5, 3),
             Catch::Matchers::WithinAbs(digit_reversal_oracle(5, 3), 1e-15));
  CHECK_THAT(lowdisc::halton_radical_inverse(5, 3),
             Catch::Matchers::WithinAbs(7.0 / 9.0, 1e-15));
  for (std::uint64_t idx : {2, 7, 19, 100, 12345})
    for (std::uint32_t base : {2u, 3u, 5u, 11u})
      CHECK_THAT(lowdisc::halton_radical_inverse(idx, base),
                 Catch::Matchers::WithinAbs(digit_reversal_oracle(idx, base),
                                            1e-14));
}

TEST_CASE("radical inverse rejects non-prime bases") {
  CHECK_THROWS_AS(lowdisc::halton_radical_inverse(3, 4),
                  std::invalid_argument);
  CHECK_THROWS_AS(lowdisc::halton_radical_inverse(3, 1),
                  std::invalid_argument);
}

TEST_CASE("raw Halton starts 1/2, 1/4, 3/4, 1/8 in base 2") {
  const PointSet ps = lowdisc::halton_raw(4, 1);
  CHECK(ps.at(0, 0) == 0.5);
  CHECK(ps.at(1, 0) == 0.25);
  CHECK(ps.at(2, 0) == 0.75);
  CHECK(ps.at(3, 0) == 0.125);
}

TEST_CASE("raw Sobol reproduces the reference sequence") {
  const PointSet ps = lowdisc::sobol_raw(kSobolRefN, kSobolRefD);
  for (int i = 0; i < kSobolRefN; ++i)
    for (int j = 0; j < kSobolRefD; ++j)
      CHECK_THAT(ps.at(i, j),
                 Catch::Matchers::WithinAbs(kSobolRef[i][j], kSobolRefTol));
}

TEST_CASE("raw Sobol first dimension after the zero point") {
  const PointSet ps = lowdisc::sobol_raw(5, 1);
  CHECK(ps.at(0, 0) == 0.0);
  CHECK(ps.at(1, 0) == 0.5);
  CHECK(ps.at(2, 0) == 0.75);
  CHECK(ps.at(3, 0) == 0.25);
  CHECK(ps.at(4, 0) == 0.375);
}

TEST_CASE("raw Sobol n=1 is the all-zeros point") {
  const PointSet ps = lowdisc::sobol_raw(1, 16);
  for (std::size_t j = 0; j < ps.d; ++j) CHECK(ps.at(0, j) == 0.0);
}

TEST_CASE("raw Sobol power-of-two prefixes are (0,m,1)-nets per coordinate") {
  for (std::size_t m : {1u, 3u, 6u, 9u}) {
    const PointSet ps = lowdisc::sobol_raw(1u << m, 12);
    for (std::size_t j = 0; j < ps.d; ++j) {
      INFO("m=" << m << " column " << j);
      CHECK(one_point_per_dyadic_interval(ps, j));
    }
  }
}

TEST_CASE("generate validates arguments") {
  CHECK_THROWS_AS(lowdisc::generate(SequenceKind::MC, 0, 3, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(lowdisc::generate(SequenceKind::MC, 3, 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(lowdisc::generate(SequenceKind::SobolScrambled, 4, 1112, 1),
                  unsupported_dimension);
  CHECK_NOTHROW(lowdisc::generate(SequenceKind::SobolScrambled, 4, 1111, 1));
}

TEST_CASE("non-power-of-two QMC sample counts warn but proceed") {
  std::vector<std::string> captured;
  auto previous = lowdisc::warning_handler();
  lowdisc::warning_handler() = [&](const std::string& m) {
    captured.push_back(m);
  };
  lowdisc::generate(SequenceKind::SobolScrambled, 7, 2, 1);
  lowdisc::generate(SequenceKind::Halton, 6, 2, 1);
  lowdisc::generate(SequenceKind::MC, 7, 2, 1);
  lowdisc::generate(SequenceKind::SobolScrambled, 8, 2, 1);
  lowdisc::warning_handler() = previous;
  REQUIRE(captured.size() == 2);
  CHECK(captured[0].find("7") != std::string::npos);
}

TEST_CASE("MC coordinates have the expected mean") {
  const PointSet ps = lowdisc::generate(SequenceKind::MC, 4096, 2, 20240817);
  for (std::size_t j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < ps.n; ++i) mean += ps.at(i, j);
    mean /= static_cast<double>(ps.n);
    // 3-sigma band, sd = 1/sqrt(12*4096)
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.5, 0.025));
  }
}

TEST_CASE("all generators stay inside [0,1)") {
  for (auto kind : {SequenceKind::MC, SequenceKind::Halton,
                    SequenceKind::SobolScrambled}) {
    const PointSet ps = lowdisc::generate(kind, 512, 9, 77);
    for (double v : ps.values) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("point sets are bit-identical across runs and threads") {
  for (auto kind : {SequenceKind::MC, SequenceKind::Halton,
                    SequenceKind::SobolScrambled}) {
    const PointSet base = lowdisc::generate(kind, 256, 5, 4242);
    std::vector<PointSet> copies(4);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        copies[t] = lowdisc::generate(kind, 256, 5, 4242);
      });
    for (auto& th : pool) th.join();
    for (const auto& c : copies)
      CHECK(std::memcmp(c.values.data(), base.values.data(),
                        base.values.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("scrambling is deterministic per seed") {
  const PointSet raw = lowdisc::sobol_raw(64, 4);
  const PointSet a = lowdisc::scramble(raw, 99);
  const PointSet b = lowdisc::scramble(raw, 99);
  const PointSet c = lowdisc::scramble(raw, 100);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
}

TEST_CASE("scrambled coordinates are marginally uniform over seeds") {
  // One fixed nontrivial point, 256 seeds: per-coordinate mean within
  // 0.5 +/- 0.06 (3 sigma at sd = 1/sqrt(12*256)).
  const PointSet raw = lowdisc::sobol_raw(8, 3);
  std::vector<double> sums(raw.d, 0.0);
  const std::size_t point = 5;
  for (std::uint64_t seed = 0; seed < 256; ++seed) {
    const PointSet s = lowdisc::scramble(raw, seed);
    for (std::size_t j = 0; j < raw.d; ++j) sums[j] += s.at(point, j);
  }
  for (std::size_t j = 0; j < raw.d; ++j)
    CHECK_THAT(sums[j] / 256.0, Catch::Matchers::WithinAbs(0.5, 0.06));
}

TEST_CASE("scrambled Sobol sample means converge to one half") {
  // Per coordinate, the balance property pins each 64-point sample mean to
  // 0.5 +/- 2^-7; averaging over 64 seeds tightens it well below 0.002.
  constexpr std::size_t n = 64, d = 3, seeds = 64;
  double sums[d] = {};
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const PointSet ps =
        lowdisc::generate(SequenceKind::SobolScrambled, n, d, 1000 + seed);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) sums[j] += ps.at(i, j);
  }
  for (std::size_t j = 0; j < d; ++j)
    CHECK_THAT(sums[j] / (n * seeds), Catch::Matchers::WithinAbs(0.5, 0.002));
}

TEST_CASE("scrambling preserves the dyadic balance of 1-D projections") {
  for (std::size_t m : {2u, 5u, 8u}) {
    const PointSet ps =
        lowdisc::generate(SequenceKind::SobolScrambled, 1u << m, 10, 31 + m);
    for (std::size_t j = 0; j < ps.d; ++j) {
      INFO("m=" << m << " column " << j);
      CHECK(one_point_per_dyadic_interval(ps, j));
    }
  }
}

TEST_CASE("star discrepancy orders Sobol < Halton < MC") {
  // Exact 2-D star discrepancy at n = 2^10; ordering must hold in at least
  // 95 of 100 seed replications.
  int ordered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double d_mc =
        star_discrepancy_2d(lowdisc::generate(SequenceKind::MC, 1024, 2, seed));
    const double d_halton = star_discrepancy_2d(
        lowdisc::generate(SequenceKind::Halton, 1024, 2, seed));
    const double d_sobol = star_discrepancy_2d(
        lowdisc::generate(SequenceKind::SobolScrambled, 1024, 2, seed));
    if (d_sobol < d_halton && d_halton < d_mc) ++ordered;
  }
  CHECK(ordered >= 95);
}

TEST_CASE("exact star discrepancy oracle sanity") {
  // Single point at the origin: D* = 1 (box just below (1,1) is empty).
  PointSet one{1, 2, SequenceKind::MC, 0, {0.0, 0.0}};
  CHECK_THAT(star_discrepancy_2d(one), Catch::Matchers::WithinAbs(1.0, 1e-12));
  // Single point at (0.5, 0.5): sup is 0.75 at the box [0,1)x[0,0.5+).
  PointSet mid{1, 2, SequenceKind::MC, 0, {0.5, 0.5}};
  CHECK_THAT(star_discrepancy_2d(mid), Catch::Matchers::WithinAbs(0.75, 1e-12));
}

TEST_CASE("regenerating a scrambled set with the same parameters is exact") {
  const PointSet a = lowdisc::generate(SequenceKind::SobolScrambled, 128, 7, 5);
  const PointSet b = lowdisc::generate(SequenceKind::SobolScrambled, 128, 7, 5);
  CHECK(a.values == b.values);
}
