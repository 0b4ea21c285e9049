#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "qmcrank/estimators.hpp"
#include "qmcrank/stats.hpp"

using namespace qmcrank;
using estimators::LoggedRecord;
using lowdisc::SequenceKind;
using scorer::Architecture;
using scorer::Scorer;

namespace {

dataio::Query make_query(std::vector<double> features, std::size_t n_items,
                         metrics::RelevanceVector rel) {
  dataio::Query q;
  q.qid = "t";
  q.n_items = n_items;
  q.feature_dim = features.size() / n_items;
  q.features = std::move(features);
  q.rel = std::move(rel);
  return q;
}

// Exact expected utility by enumeration: sum_r pi(r) * dcg(r, rel).
double exact_utility(const Scorer& model, const dataio::Query& q) {
  const pl::Scores s = scorer::score(model, q);
  double total = 0.0;
  for (const auto& [r, p] : pl::enumerate_pl(s))
    total += p * metrics::dcg(r, q.rel);
  return total;
}

}  // namespace

TEST_CASE("utility of a single-item query is exact for any N") {
  const auto q = make_query({1.0, 2.0}, 1, {3.0});
  const Scorer model{Architecture::Linear, 2, 0, false, {0.1, -0.2}};
  for (std::size_t n : {1u, 3u, 16u}) {
    const auto est = estimators::utility_estimate(
        std::vector<dataio::Query>{q}, model, SequenceKind::MC, n, 7);
    CHECK_THAT(est.value, Catch::Matchers::WithinAbs(3.0, 1e-15));
  }
}

TEST_CASE("a constant reward passes through exactly") {
  const auto q = make_query({1.0, 0.0, 0.0, 1.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 2, 0, false, {0.4, 0.4}};
  const auto est = estimators::utility_estimate(
      std::vector<dataio::Query>{q}, model, SequenceKind::SobolScrambled, 8, 3,
      [](const dataio::Query&, const pl::Ranking&) { return 2.5; });
  CHECK_THAT(est.value, Catch::Matchers::WithinAbs(2.5, 1e-15));
}

TEST_CASE("seed-averaged utility approaches the enumeration value") {
  const auto q = make_query({0.7, -0.2, 0.1, 0.9, -0.5, 0.3}, 3,
                            {2.0, 0.0, 1.0});
  const Scorer model{Architecture::Linear, 2, 0, false, {0.8, -0.3}};
  const double exact = exact_utility(model, q);
  const std::vector<dataio::Query> batch{q};

  for (auto kind : {SequenceKind::MC, SequenceKind::SobolScrambled}) {
    std::vector<double> values(500);
    for (std::size_t seed = 0; seed < values.size(); ++seed)
      values[seed] =
          estimators::utility_estimate(batch, model, kind, 32, seed).value;
    const double mean = stats::mean(values);
    const double se = stats::standard_error(values);
    INFO(lowdisc::to_string(kind));
    CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("MC and QMC utility estimates agree in seed-averaged mean") {
  const dataio::Dataset pool = dataio::synthetic_stream(5, 4, 8, 77);
  const Scorer model = scorer::init_scorer(Architecture::Linear, 4, 0, 5);
  std::vector<double> mc(300), qmc(300);
  for (std::size_t seed = 0; seed < 300; ++seed) {
    mc[seed] = estimators::utility_estimate(pool.queries, model,
                                            SequenceKind::MC, 16, seed)
                   .value;
    qmc[seed] = estimators::utility_estimate(
                    pool.queries, model, SequenceKind::SobolScrambled, 16, seed)
                    .value;
  }
  const double diff = stats::mean(mc) - stats::mean(qmc);
  const double se = std::sqrt(stats::sample_variance(mc) / 300.0 +
                              stats::sample_variance(qmc) / 300.0);
  CHECK(std::abs(diff) <= 3.0 * se);
}

TEST_CASE("ips with the logging policy as target is the plain mean") {
  const auto q = make_query({1.0, 0.0, 0.0, 1.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 2, 0, false, {0.6, -0.1}};
  const pl::Scores s = scorer::score(model, q);

  std::vector<LoggedRecord> logged;
  const std::vector<double> deltas{1.0, 0.25, 0.5};
  const std::vector<pl::Ranking> rankings{{0, 1}, {1, 0}, {0, 1}};
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    LoggedRecord rec;
    rec.query = q;
    rec.ranking = rankings[i];
    rec.delta = deltas[i];
    rec.logging_prob = std::exp(pl::log_prob(rankings[i], s));
    logged.push_back(rec);
  }
  const double v =
      estimators::ips_utility(logged, model, estimators::IpsMode::FullRanking);
  CHECK_THAT(v, Catch::Matchers::WithinAbs(
                    (deltas[0] + deltas[1] + deltas[2]) / 3.0, 1e-12));
}

TEST_CASE("ips reweights a uniform logger to the target policy") {
  // Two items, target scores (log 2, 0): pi([0,1]) = 2/3. Uniform logging,
  // records {A: delta 1, B: delta 0} -> (1 * (2/3)/(1/2) + 0) / 2 = 2/3.
  const auto q = make_query({1.0, 0.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 1, 0, false, {std::log(2.0)}};

  LoggedRecord a;
  a.query = q;
  a.ranking = {0, 1};
  a.delta = 1.0;
  a.logging_prob = 0.5;
  LoggedRecord b = a;
  b.ranking = {1, 0};
  b.delta = 0.0;
  const std::vector<LoggedRecord> logged{a, b};
  const double v =
      estimators::ips_utility(logged, model, estimators::IpsMode::FullRanking);
  CHECK_THAT(v, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-12));
}

TEST_CASE("a single record contributes weight times delta") {
  const auto q = make_query({1.0, 0.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 1, 0, false, {0.4}};
  LoggedRecord rec;
  rec.query = q;
  rec.ranking = {1, 0};
  rec.delta = 3.0;
  rec.logging_prob = 0.25;
  const pl::Scores s = scorer::score(model, q);
  const double w = std::exp(pl::log_prob(rec.ranking, s)) / 0.25;
  const double v = estimators::ips_utility(std::vector<LoggedRecord>{rec},
                                           model,
                                           estimators::IpsMode::FullRanking);
  CHECK_THAT(v, Catch::Matchers::WithinAbs(w * 3.0, 1e-12));
}

TEST_CASE("ips flags non-positive propensities with the record index") {
  const auto q = make_query({1.0, 0.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 1, 0, false, {0.0}};
  LoggedRecord good;
  good.query = q;
  good.ranking = {0, 1};
  good.delta = 1.0;
  good.logging_prob = 0.5;
  LoggedRecord bad = good;
  bad.logging_prob = 0.0;
  try {
    estimators::ips_utility(std::vector<LoggedRecord>{good, bad}, model,
                            estimators::IpsMode::FullRanking);
    FAIL("expected positivity_violation");
  } catch (const positivity_violation& e) {
    CHECK(e.record_index == 1);
  }

  LoggedRecord pos = good;
  pos.position_rewards = {1.0, 0.0};
  pos.position_propensities = {0.5, 0.0};
  CHECK_THROWS_AS(
      estimators::ips_utility(std::vector<LoggedRecord>{pos}, model,
                              estimators::IpsMode::PositionBased),
      positivity_violation);
}

TEST_CASE("position-based ips with matching policies recovers the reward") {
  const auto q = make_query({1.0, 0.0}, 2, {1.0, 0.0});
  const Scorer model{Architecture::Linear, 1, 0, false, {0.0}};  // uniform
  LoggedRecord rec;
  rec.query = q;
  rec.ranking = {0, 1};
  rec.position_rewards = {1.0, 0.0};
  rec.position_propensities = {0.5, 0.5};
  estimators::IpsOptions opts;
  opts.n_samples = 1u << 12;
  const double v =
      estimators::ips_utility(std::vector<LoggedRecord>{rec}, model,
                              estimators::IpsMode::PositionBased, opts);
  CHECK_THAT(v, Catch::Matchers::WithinAbs(1.0, 0.05));
}

TEST_CASE("zero reward gives a zero gradient") {
  const dataio::Dataset pool = dataio::synthetic_stream(4, 3, 2, 1);
  const Scorer model = scorer::init_scorer(Architecture::Mlp, 3, 4, 2);
  const auto est = estimators::policy_gradient(
      pool.queries, model, SequenceKind::MC, 8, 3,
      [](const dataio::Query&, const pl::Ranking&) { return 0.0; });
  for (double g : est.g) CHECK(g == 0.0);
  CHECK(est.norm_sq == 0.0);
}

TEST_CASE("single-item queries contribute zero gradient") {
  const auto q = make_query({1.0, 2.0, 3.0}, 1, {1.0});
  const Scorer model{Architecture::Linear, 3, 0, false, {0.1, 0.2, 0.3}};
  const auto est = estimators::policy_gradient(std::vector<dataio::Query>{q},
                                               model, SequenceKind::MC, 8, 3);
  for (double g : est.g) CHECK(g == 0.0);
}

TEST_CASE("norm_sq matches the recomputed squared norm") {
  const dataio::Dataset pool = dataio::synthetic_stream(5, 4, 4, 9);
  const Scorer model = scorer::init_scorer(Architecture::Linear, 4, 0, 11);
  const auto est = estimators::policy_gradient(pool.queries, model,
                                               SequenceKind::SobolScrambled, 16,
                                               21);
  double check = 0.0;
  for (double g : est.g) check += g * g;
  CHECK_THAT(est.norm_sq,
             Catch::Matchers::WithinRel(check, 1e-10));
}

TEST_CASE("seed-averaged policy gradient matches the enumeration oracle") {
  // 3-item query, linear scorer: exact gradient of sum_r pi_theta(r) dcg(r)
  // via enumeration plus central differences on theta.
  const auto q = make_query({0.9, -0.4, 0.2, 0.6, -0.7, 0.1}, 3,
                            {2.0, 0.0, 1.0});
  const std::vector<dataio::Query> batch{q};
  Scorer model{Architecture::Linear, 2, 0, false, {0.5, -0.25}};

  std::vector<double> exact(model.weights.size());
  const double h = 1e-5;
  for (std::size_t p = 0; p < exact.size(); ++p) {
    Scorer hi = model, lo = model;
    hi.weights[p] += h;
    lo.weights[p] -= h;
    exact[p] = (exact_utility(hi, q) - exact_utility(lo, q)) / (2 * h);
  }

  std::vector<double> mean(model.weights.size(), 0.0);
  const std::size_t seeds = 2000;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    const auto est = estimators::policy_gradient(batch, model,
                                                 SequenceKind::MC, 8, seed);
    for (std::size_t p = 0; p < mean.size(); ++p) mean[p] += est.g[p];
  }
  for (double& m : mean) m /= static_cast<double>(seeds);

  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t p = 0; p < mean.size(); ++p) {
    dot += mean[p] * exact[p];
    na += mean[p] * mean[p];
    nb += exact[p] * exact[p];
  }
  CHECK(dot / std::sqrt(na * nb) > 0.99);
}

TEST_CASE("variance decomposition validates its inputs") {
  const dataio::Dataset pool = dataio::synthetic_stream(5, 4, 16, 3);
  const Scorer model = scorer::init_scorer(Architecture::Linear, 4, 0, 1);
  estimators::VarDecompConfig cfg;
  cfg.q_batch = 32;  // larger than the pool
  CHECK_THROWS_AS(
      estimators::variance_decomposition(pool.queries, model, cfg),
      std::invalid_argument);
  cfg.q_batch = 4;
  cfg.outer_reps = 10;  // too few
  CHECK_THROWS_AS(
      estimators::variance_decomposition(pool.queries, model, cfg),
      std::invalid_argument);
}

TEST_CASE("variance decomposition: totals, determinism, QMC dominance") {
  const dataio::Dataset pool = dataio::synthetic_stream(5, 6, 64, 31);
  const Scorer model = scorer::init_scorer(Architecture::Linear, 6, 0, 13);
  estimators::VarDecompConfig cfg;
  cfg.q_batch = 4;
  cfg.n_grid = {4, 16};
  cfg.outer_reps = 40;
  cfg.inner_reps = 40;
  cfg.seed = 5;
  cfg.threads = 4;
  const auto rows = estimators::variance_decomposition(pool.queries, model, cfg);
  REQUIRE(rows.size() == 4);  // 2 kinds x 2 grid points

  for (const auto& row : rows) {
    // Law of total variance on the harness output. The pooled estimate has
    // sampling error ~ sqrt(2/(outer-1)) relative.
    const double recomposed = row.var_between_queries + row.mean_within_variance;
    const double tol = 3.0 * row.total_variance * std::sqrt(2.0 / 39.0);
    CHECK(std::abs(row.total_variance - recomposed) <= tol);
    CHECK(row.var_between_queries >= 0.0);
    CHECK(row.mean_within_variance >= 0.0);
  }

  // Paired grid: QMC within-variance no worse than MC at each N.
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& mc = rows[i];
    const auto& qmc = rows[2 + i];
    REQUIRE(mc.n == qmc.n);
    CHECK(qmc.mean_within_variance <= mc.mean_within_variance);
  }

  estimators::VarDecompConfig single = cfg;
  single.threads = 1;
  const auto rows1 =
      estimators::variance_decomposition(pool.queries, model, single);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].var_between_queries == rows1[i].var_between_queries);
    CHECK(rows[i].mean_within_variance == rows1[i].mean_within_variance);
    CHECK(rows[i].total_variance == rows1[i].total_variance);
  }
}

TEST_CASE("the gradient-norm statistic runs through the harness") {
  const dataio::Dataset pool = dataio::synthetic_stream(4, 3, 32, 8);
  const Scorer model = scorer::init_scorer(Architecture::Linear, 3, 0, 2);
  estimators::VarDecompConfig cfg;
  cfg.q_batch = 4;
  cfg.n_grid = {4, 8};
  cfg.outer_reps = 30;
  cfg.inner_reps = 30;
  cfg.statistic = estimators::HarnessStatistic::GradNormSq;
  cfg.threads = 4;
  const auto rows = estimators::variance_decomposition(pool.queries, model, cfg);
  for (const auto& row : rows) {
    CHECK(std::isfinite(row.total_variance));
    CHECK(row.total_variance > 0.0);
  }
}
