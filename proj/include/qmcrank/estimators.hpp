#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qmcrank/dataio.hpp"
#include "qmcrank/detail/parallel.hpp"
#include "qmcrank/gumbel_pl.hpp"
#include "qmcrank/lowdisc.hpp"
#include "qmcrank/metrics.hpp"
#include "qmcrank/propensity.hpp"
#include "qmcrank/scorer.hpp"
#include "qmcrank/stats.hpp"

namespace qmcrank::estimators {

using lowdisc::SequenceKind;

// Ranking reward Delta(r, q). The default scores a sampled ranking by DCG
// against the query's relevance grades.
using DeltaFn = std::function<double(const dataio::Query&, const pl::Ranking&)>;

inline DeltaFn dcg_delta() {
  return [](const dataio::Query& q, const pl::Ranking& r) {
    return metrics::dcg(r, q.rel);
  };
}

struct UtilityEstimate {
  double value = 0.0;
  std::size_t q_batch = 0;
  std::size_t n_samples = 0;
  SequenceKind kind = SequenceKind::MC;
};

struct GradientEstimate {
  std::vector<double> g;
  std::size_t q_batch = 0;
  std::size_t n_samples = 0;
  double norm_sq = 0.0;
};

// (1/QN) sum_q sum_n Delta(r_{n,q}): rankings sampled from the scorer's PL
// policy with the chosen uniform driver. Each query gets its own driver
// substream (one scrambling seed per query, derived from `seed`).
inline UtilityEstimate utility_estimate(std::span<const dataio::Query> queries,
                                        const scorer::Scorer& model,
                                        SequenceKind kind, std::size_t n_samples,
                                        std::uint64_t seed,
                                        const DeltaFn& delta = dcg_delta()) {
  if (queries.empty()) throw std::invalid_argument("empty query batch");
  if (n_samples == 0) throw std::invalid_argument("need N >= 1 samples");
  double total = 0.0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const dataio::Query& q = queries[qi];
    const pl::Scores scores = scorer::score(model, q);
    const lowdisc::PointSet points =
        lowdisc::generate(kind, n_samples, q.n_items,
                          rng::mix(seed, 0x757469u, qi));
    double q_total = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i)
      q_total += delta(q, pl::rank_from_uniforms(scores, points.row(i)));
    total += q_total / static_cast<double>(n_samples);
  }
  return {total / static_cast<double>(queries.size()), queries.size(),
          n_samples, kind};
}

// Score-function (REINFORCE) gradient, Delta-weighted and averaged over the
// batch and the per-query samples, backpropagated through the scorer.
inline GradientEstimate policy_gradient(std::span<const dataio::Query> queries,
                                        const scorer::Scorer& model,
                                        SequenceKind kind, std::size_t n_samples,
                                        std::uint64_t seed,
                                        const DeltaFn& delta = dcg_delta()) {
  if (queries.empty()) throw std::invalid_argument("empty query batch");
  if (n_samples == 0) throw std::invalid_argument("need N >= 1 samples");
  GradientEstimate est;
  est.q_batch = queries.size();
  est.n_samples = n_samples;
  est.g.assign(model.weights.size(), 0.0);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const dataio::Query& q = queries[qi];
    const pl::Scores scores = scorer::score(model, q);
    const lowdisc::PointSet points =
        lowdisc::generate(kind, n_samples, q.n_items,
                          rng::mix(seed, 0x757469u, qi));
    std::vector<double> upstream(q.n_items, 0.0);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const pl::Ranking r = pl::rank_from_uniforms(scores, points.row(i));
      const double d = delta(q, r);
      const std::vector<double> g = pl::log_prob_grad(r, scores);
      for (std::size_t j = 0; j < upstream.size(); ++j)
        upstream[j] += g[j] * d;
    }
    const double inv_n = 1.0 / static_cast<double>(n_samples);
    for (double& u : upstream) u *= inv_n;
    const std::vector<double> qg = scorer::backprop_scores(model, q, upstream);
    for (std::size_t j = 0; j < est.g.size(); ++j) est.g[j] += qg[j];
  }
  const double inv_q = 1.0 / static_cast<double>(queries.size());
  for (double& g : est.g) {
    g *= inv_q;
    est.norm_sq += g * g;
  }
  return est;
}

// ---- inverse propensity scoring ---------------------------------------------

enum class IpsMode { FullRanking, PositionBased };

// One logged impression. FullRanking mode uses (ranking, delta, log_prob of
// the logging policy); PositionBased mode uses per-position rewards and the
// logging policy's placement propensities h(i_k, k).
struct LoggedRecord {
  dataio::Query query;
  pl::Ranking ranking;
  double delta = 0.0;
  double logging_prob = 0.0;
  std::vector<double> position_rewards;
  std::vector<double> position_propensities;
};

struct IpsOptions {
  SequenceKind kind = SequenceKind::SobolScrambled;
  std::size_t n_samples = 1u << 12;  // for estimating target propensities
  std::uint64_t seed = 1;
};

// Off-policy utility of `model` from logged data. FullRanking reweights each
// record by pi(r|q)/h(r|q); PositionBased reweights per-position rewards by
// estimated target placement propensities over the logged ones.
inline double ips_utility(std::span<const LoggedRecord> logged,
                          const scorer::Scorer& model, IpsMode mode,
                          const IpsOptions& opts = {}) {
  if (logged.empty()) throw std::invalid_argument("no logged records");
  double total = 0.0;
  for (std::size_t ri = 0; ri < logged.size(); ++ri) {
    const LoggedRecord& rec = logged[ri];
    const pl::Scores target_scores = scorer::score(model, rec.query);
    if (mode == IpsMode::FullRanking) {
      if (!(rec.logging_prob > 0.0))
        throw positivity_violation("logging probability must be positive", ri);
      const double target_prob =
          std::exp(pl::log_prob(rec.ranking, target_scores));
      total += rec.delta * target_prob / rec.logging_prob;
    } else {
      const std::size_t k = rec.ranking.size();
      if (rec.position_rewards.size() != k ||
          rec.position_propensities.size() != k)
        throw std::invalid_argument("position-based record lengths mismatch");
      const propensity::PropensityMatrix target =
          propensity::estimate_propensities(target_scores, opts.kind,
                                            opts.n_samples,
                                            rng::mix(opts.seed, 0x697073u, ri));
      for (std::size_t pos = 0; pos < k; ++pos) {
        if (!(rec.position_propensities[pos] > 0.0))
          throw positivity_violation(
              "propensity at position " + std::to_string(pos + 1) +
                  " must be positive",
              ri);
        total += rec.position_rewards[pos] /
                 rec.position_propensities[pos] *
                 target.at(rec.ranking[pos], pos);
      }
    }
  }
  return total / static_cast<double>(logged.size());
}

// ---- law-of-total-variance harness ------------------------------------------

enum class HarnessStatistic { Utility, GradNormSq };

struct VarDecompConfig {
  std::vector<SequenceKind> kinds{SequenceKind::MC,
                                  SequenceKind::SobolScrambled};
  std::size_t q_batch = 8;
  std::vector<std::size_t> n_grid;  // defaults to 2^2 .. 2^8
  std::size_t outer_reps = 100;     // fresh query batches
  std::size_t inner_reps = 100;     // fresh sampling per fixed batch
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  HarnessStatistic statistic = HarnessStatistic::Utility;
  DeltaFn delta = dcg_delta();
};

struct VarDecompRow {
  SequenceKind kind;
  std::size_t q_batch;
  std::size_t n;
  double var_between_queries;   // Var over batches of the inner mean
  double mean_within_variance;  // mean over batches of the inner variance
  double total_variance;        // pooled variance over all draws
};

// Empirical two-term variance decomposition of the utility estimator: outer
// replications redraw the query batch (with replacement from the pool), inner
// replications redraw sampling/scrambling seeds for the fixed batch. Batch
// draws are shared across kinds and N so grid points are paired.
inline std::vector<VarDecompRow> variance_decomposition(
    std::span<const dataio::Query> pool, const scorer::Scorer& model,
    const VarDecompConfig& cfg) {
  VarDecompConfig c = cfg;
  if (c.n_grid.empty())
    for (std::size_t e = 2; e <= 8; ++e) c.n_grid.push_back(1u << e);
  if (pool.size() < c.q_batch)
    throw std::invalid_argument("query pool smaller than batch size");
  if (c.outer_reps < 30 || c.inner_reps < 30)
    throw std::invalid_argument(
        "need >= 30 outer and inner replications for stable second moments");

  std::vector<VarDecompRow> rows;
  for (std::size_t ki = 0; ki < c.kinds.size(); ++ki) {
    const SequenceKind kind = c.kinds[ki];
    for (std::size_t n : c.n_grid) {
      std::vector<double> inner_means(c.outer_reps);
      std::vector<double> inner_vars(c.outer_reps);
      std::vector<double> all(c.outer_reps * c.inner_reps);
      qmcrank::detail::parallel_for(
          c.outer_reps, c.threads, [&](std::size_t outer) {
            // Batch choice depends only on (seed, outer): paired across
            // kinds and N.
            rng::Stream batch_stream(rng::mix(c.seed, 0xba7c4u, outer));
            std::vector<dataio::Query> batch;
            batch.reserve(c.q_batch);
            for (std::size_t i = 0; i < c.q_batch; ++i)
              batch.push_back(pool[batch_stream.below(pool.size())]);

            std::vector<double> values(c.inner_reps);
            for (std::size_t inner = 0; inner < c.inner_reps; ++inner) {
              const std::uint64_t s = rng::mix(c.seed, ki, n, outer, inner);
              if (c.statistic == HarnessStatistic::Utility)
                values[inner] =
                    utility_estimate(batch, model, kind, n, s, c.delta).value;
              else
                values[inner] =
                    policy_gradient(batch, model, kind, n, s, c.delta).norm_sq;
              all[outer * c.inner_reps + inner] = values[inner];
            }
            inner_means[outer] = stats::mean(values);
            inner_vars[outer] = stats::sample_variance(values);
          });
      rows.push_back({kind, c.q_batch, n, stats::sample_variance(inner_means),
                      stats::mean(inner_vars), stats::sample_variance(all)});
    }
  }
  return rows;
}

// CSV projection with the documented stable header.
inline dataio::ResultTable to_table(std::span<const VarDecompRow> rows) {
  dataio::ResultTable t;
  t.header = {"kind", "Q", "N", "var_between_queries", "mean_within_variance",
              "total_variance"};
  for (const auto& r : rows)
    t.rows.push_back({lowdisc::to_string(r.kind), std::to_string(r.q_batch),
                      std::to_string(r.n),
                      dataio::format_double(r.var_between_queries),
                      dataio::format_double(r.mean_within_variance),
                      dataio::format_double(r.total_variance)});
  return t;
}

}  // namespace qmcrank::estimators
