#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qmcrank/dataio.hpp"
#include "qmcrank/detail/parallel.hpp"
#include "qmcrank/gumbel_pl.hpp"
#include "qmcrank/lowdisc.hpp"
#include "qmcrank/stats.hpp"

namespace qmcrank::propensity {

using lowdisc::SequenceKind;

// p[i][k] = P(rank(i) = k). Doubly stochastic: it is an average (or exact
// mixture) of permutation matrices.
struct PropensityMatrix {
  std::size_t size = 0;
  std::size_t n_samples = 0;
  std::vector<double> p;  // size*size, row = item, column = position

  double at(std::size_t item, std::size_t position) const {
    return p[item * size + position];
  }
};

// Empirical placement frequencies from n sampled rankings.
inline PropensityMatrix estimate_propensities(const pl::Scores& scores,
                                              SequenceKind kind,
                                              std::size_t n,
                                              std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need n >= 1 samples");
  const std::size_t k = scores.size();
  const lowdisc::PointSet points = lowdisc::generate(kind, n, k, seed);
  std::vector<std::uint64_t> counts(k * k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const pl::Ranking r = pl::rank_from_uniforms(scores, points.row(i));
    for (std::size_t pos = 0; pos < k; ++pos) ++counts[r[pos] * k + pos];
  }
  PropensityMatrix out{k, n, std::vector<double>(k * k)};
  for (std::size_t i = 0; i < k * k; ++i)
    out.p[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return out;
}

// Exact placement probabilities by enumeration. Oracle-sized lists only.
inline PropensityMatrix exact_propensities(const pl::Scores& scores) {
  const std::size_t k = scores.size();
  const auto table = pl::enumerate_pl(scores);
  PropensityMatrix out{k, 0, std::vector<double>(k * k, 0.0)};
  for (const auto& [ranking, prob] : table)
    for (std::size_t pos = 0; pos < k; ++pos)
      out.p[ranking[pos] * k + pos] += prob;
  return out;
}

struct MseConfig {
  std::vector<std::size_t> list_sizes{5, 25, 50};
  std::vector<std::size_t> n_grid;  // defaults to 2^2 .. 2^10
  std::size_t replications = 200;
  std::vector<SequenceKind> kinds{SequenceKind::MC,
                                  SequenceKind::SobolScrambled};
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  // Sample count of the MC reference used when exact enumeration is
  // infeasible (list size > 8).
  std::size_t reference_samples = 1u << 20;
};

struct MseRow {
  std::size_t list_size;
  SequenceKind kind;
  std::size_t n;
  double mse_mean;
  double mse_se;  // NaN when replications == 1
};

struct MseResult {
  std::vector<MseRow> rows;
  std::size_t replications = 0;
  std::string reference_note;  // how ground truth was obtained per size
};

namespace detail_ {

inline double entrywise_mse(const PropensityMatrix& a,
                            const PropensityMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i) {
    const double d = a.p[i] - b.p[i];
    s += d * d;
  }
  return s / static_cast<double>(a.p.size());
}

}  // namespace detail_

// Variance sweep over (list size, kind, n): per replication, estimate the
// propensity matrix and score it against the reference (exact enumeration up
// to 8 items, a large fixed-seed MC estimate beyond). Scores are standard
// normal with a seed fixed per list size, shared across kinds and
// replications; sampling seeds are fresh per replication.
inline MseResult mse_experiment(const MseConfig& cfg) {
  MseConfig c = cfg;
  if (c.n_grid.empty())
    for (std::size_t e = 2; e <= 10; ++e) c.n_grid.push_back(1u << e);
  if (c.replications == 0)
    throw std::invalid_argument("need >= 1 replication");

  MseResult result;
  result.replications = c.replications;
  for (std::size_t size : c.list_sizes) {
    pl::Scores scores(size);
    rng::Stream score_stream(rng::mix(c.seed, 0x5343u, size));
    for (double& s : scores) s = score_stream.gaussian();

    PropensityMatrix reference;
    if (size <= pl::kEnumerationLimit) {
      reference = exact_propensities(scores);
      result.reference_note += "list_size " + std::to_string(size) +
                               ": exact enumeration; ";
    } else {
      reference = estimate_propensities(scores, SequenceKind::MC,
                                        c.reference_samples,
                                        rng::mix(c.seed, 0x524546u, size));
      result.reference_note += "list_size " + std::to_string(size) + ": MC " +
                               std::to_string(c.reference_samples) +
                               " samples; ";
    }

    for (std::size_t ki = 0; ki < c.kinds.size(); ++ki) {
      const SequenceKind kind = c.kinds[ki];
      for (std::size_t n : c.n_grid) {
        std::vector<double> mses(c.replications);
        qmcrank::detail::parallel_for(
            c.replications, c.threads, [&](std::size_t rep) {
              const std::uint64_t rep_seed =
                  rng::mix(c.seed, ki, size, n, rep);
              const PropensityMatrix est =
                  estimate_propensities(scores, kind, n, rep_seed);
              mses[rep] = detail_::entrywise_mse(est, reference);
            });
        MseRow row{size, kind, n, stats::mean(mses),
                   std::numeric_limits<double>::quiet_NaN()};
        if (c.replications > 1) row.mse_se = stats::standard_error(mses);
        result.rows.push_back(row);
      }
    }
  }
  return result;
}

// CSV projection with the documented stable header.
inline dataio::ResultTable to_table(const MseResult& result) {
  dataio::ResultTable t;
  t.header = {"list_size", "kind", "n", "mse_mean", "mse_se"};
  for (const auto& r : result.rows) {
    t.rows.push_back({std::to_string(r.list_size), lowdisc::to_string(r.kind),
                      std::to_string(r.n), dataio::format_double(r.mse_mean),
                      std::isnan(r.mse_se) ? std::string()
                                           : dataio::format_double(r.mse_se)});
  }
  return t;
}

}  // namespace qmcrank::propensity
