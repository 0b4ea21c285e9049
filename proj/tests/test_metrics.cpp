#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "qmcrank/metrics.hpp"
#include "qmcrank/rng.hpp"

using namespace qmcrank;
using metrics::ClickVector;
using metrics::RelevanceVector;
using pl::Ranking;

TEST_CASE("dcg on tiny cases") {
  CHECK_THAT(metrics::dcg({0, 1}, {1.0, 0.0}),
             Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(metrics::dcg({1, 0}, {1.0, 0.0}),
             Catch::Matchers::WithinAbs(0.6309297535714575, 1e-12));
  CHECK(metrics::dcg({2, 0, 1}, {0.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("dcg respects the cutoff") {
  const RelevanceVector rel{3.0, 2.0, 1.0};
  const Ranking r{0, 1, 2};
  CHECK_THAT(metrics::dcg(r, rel, 1), Catch::Matchers::WithinAbs(3.0, 1e-15));
  CHECK_THAT(metrics::dcg(r, rel, 2),
             Catch::Matchers::WithinAbs(3.0 + 2.0 / std::log2(3.0), 1e-12));
  CHECK(metrics::dcg(r, rel, 3) == metrics::dcg(r, rel));
}

TEST_CASE("dcg validates lengths") {
  CHECK_THROWS_AS(metrics::dcg({0, 1}, {1.0}), std::invalid_argument);
}

TEST_CASE("ndcg is one for the ideal ranking and zero for no relevance") {
  const RelevanceVector rel{0.0, 2.0, 1.0};
  CHECK_THAT(metrics::ndcg({1, 2, 0}, rel),
             Catch::Matchers::WithinAbs(1.0, 1e-15));
  CHECK_THAT(metrics::ndcg({1, 0}, {1.0, 0.0}),
             Catch::Matchers::WithinAbs(0.6309297535714575, 1e-12));
  CHECK(metrics::ndcg({0, 1}, {0.0, 0.0}) == 0.0);
}

TEST_CASE("ndcg stays within [0,1] on random inputs") {
  rng::Stream stream(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + trial % 8;
    RelevanceVector rel(k);
    for (double& g : rel)
      g = std::floor(stream.uniform() * 4.0);  // grades 0..3
    Ranking r(k);
    std::iota(r.begin(), r.end(), 0);
    for (std::size_t i = k; i > 1; --i)
      std::swap(r[i - 1], r[stream.below(i)]);
    const double v = metrics::ndcg(r, rel);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("moving a more relevant item up never decreases dcg") {
  rng::Stream stream(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 7;
    RelevanceVector rel(k);
    for (double& g : rel) g = std::floor(stream.uniform() * 3.0);
    Ranking r(k);
    std::iota(r.begin(), r.end(), 0);
    for (std::size_t i = k; i > 1; --i)
      std::swap(r[i - 1], r[stream.below(i)]);

    const std::size_t hi = stream.below(k);
    const std::size_t lo = stream.below(k);
    if (hi >= lo) continue;
    // Put the more relevant of the two into the higher position.
    Ranking improved = r;
    if (rel[improved[lo]] > rel[improved[hi]])
      std::swap(improved[hi], improved[lo]);
    CHECK(metrics::dcg(improved, rel) >= metrics::dcg(r, rel) - 1e-12);
  }
}

TEST_CASE("click threshold at position 1 with full relevance") {
  const Ranking r{0, 1};
  const RelevanceVector rel{1.0, 0.0};
  const std::vector<double> u{0.3, 0.9};
  const ClickVector clicks = metrics::simulate_clicks(r, rel, u, 1.0);
  CHECK(clicks[0] == 1);
  CHECK(clicks[1] == 0);
}

TEST_CASE("zero relevance never clicks") {
  const Ranking r{0, 1, 2};
  const RelevanceVector rel{0.0, 0.0, 0.0};
  rng::Stream stream(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(3);
    for (double& x : u) x = stream.uniform();
    for (auto c : metrics::simulate_clicks(r, rel, u, 1.0)) CHECK(c == 0);
  }
}

TEST_CASE("click rate at position k approaches 1/k") {
  // Fully relevant item at position 4: expected click rate 0.25.
  const Ranking r{0, 1, 2, 3};
  const RelevanceVector rel{1.0, 1.0, 1.0, 1.0};
  rng::Stream stream(99);
  const int n = 1 << 16;
  int clicks_at_4 = 0;
  for (int trial = 0; trial < n; ++trial) {
    std::vector<double> u(4);
    for (double& x : u) x = stream.uniform();
    clicks_at_4 += metrics::simulate_clicks(r, rel, u, 1.0)[3];
  }
  const double rate = static_cast<double>(clicks_at_4) / n;
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  CHECK_THAT(rate, Catch::Matchers::WithinAbs(0.25, 3 * sigma));
}

TEST_CASE("graded relevance is normalized by the maximum grade") {
  const Ranking r{0};
  const RelevanceVector rel{2.0};
  // rel_prob = 2/4 = 0.5 at position 1.
  CHECK(metrics::simulate_clicks(r, rel, std::vector<double>{0.49}, 4.0)[0] ==
        1);
  CHECK(metrics::simulate_clicks(r, rel, std::vector<double>{0.51}, 4.0)[0] ==
        0);
}

TEST_CASE("ctr counts mean clicks per list") {
  std::vector<ClickVector> batch;
  CHECK_THROWS_AS(metrics::ctr(batch), std::invalid_argument);

  batch = {{0, 0, 0}, {0, 0, 0}};
  CHECK(metrics::ctr(batch) == 0.0);

  batch = {{1, 0}, {0, 1}, {1, 0}};
  CHECK_THAT(metrics::ctr(batch), Catch::Matchers::WithinAbs(1.0, 1e-15));

  batch = {{1, 0}, {0, 0}};
  CHECK_THAT(metrics::ctr(batch), Catch::Matchers::WithinAbs(0.5, 1e-15));
}
