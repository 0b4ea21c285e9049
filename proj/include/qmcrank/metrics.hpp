#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "qmcrank/gumbel_pl.hpp"

namespace qmcrank::metrics {

// Non-negative relevance grades, one per item.
using RelevanceVector = std::vector<double>;

// Binary click indicators over positions 1..|q|.
using ClickVector = std::vector<std::uint8_t>;

constexpr std::size_t kNoCutoff = static_cast<std::size_t>(-1);

// DCG with linear gain and log2(position+1) discount.
inline double dcg(const pl::Ranking& ranking, const RelevanceVector& rel,
                  std::size_t cutoff = kNoCutoff) {
  if (ranking.size() != rel.size())
    throw std::invalid_argument("ranking and relevance lengths differ");
  const std::size_t depth = std::min(cutoff, ranking.size());
  double total = 0.0;
  for (std::size_t k = 0; k < depth; ++k)
    total += rel[ranking[k]] / std::log2(static_cast<double>(k) + 2.0);
  return total;
}

// DCG normalized by the ideal (relevance-sorted) ranking. All-zero relevance
// is defined as 0 rather than an error.
inline double ndcg(const pl::Ranking& ranking, const RelevanceVector& rel,
                   std::size_t cutoff = kNoCutoff) {
  pl::Ranking ideal(ranking.size());
  std::iota(ideal.begin(), ideal.end(), 0);
  std::sort(ideal.begin(), ideal.end(),
            [&](int a, int b) { return rel[a] > rel[b]; });
  const double best = dcg(ideal, rel, cutoff);
  if (best <= 0.0) return 0.0;
  return dcg(ranking, rel, cutoff) / best;
}

// Position-bias click model: position k is examined with probability 1/k and
// a seen item is clicked with probability rel/max_grade. Grades are
// normalized by the dataset-wide maximum so binary grades pass through.
inline ClickVector simulate_clicks(const pl::Ranking& ranking,
                                   const RelevanceVector& rel,
                                   std::span<const double> u,
                                   double max_grade = 1.0) {
  if (ranking.size() != rel.size() || u.size() != rel.size())
    throw std::invalid_argument("clicks: length mismatch");
  ClickVector clicks(ranking.size(), 0);
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    const double rel_prob =
        max_grade > 0.0 ? rel[ranking[k]] / max_grade : 0.0;
    const double threshold = rel_prob / static_cast<double>(k + 1);
    clicks[k] = u[k] < threshold ? 1 : 0;
  }
  return clicks;
}

// Mean clicks per list over a batch.
inline double ctr(std::span<const ClickVector> batch) {
  if (batch.empty()) throw std::invalid_argument("ctr of an empty batch");
  double total = 0.0;
  for (const auto& clicks : batch)
    for (std::uint8_t c : clicks) total += c;
  return total / static_cast<double>(batch.size());
}

}  // namespace qmcrank::metrics
