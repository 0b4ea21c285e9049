#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "qmcrank/errors.hpp"
#include "qmcrank/lowdisc.hpp"

namespace qmcrank::pl {

// Log-scale item scores; one entry per item of a query.
using Scores = std::vector<double>;

// Permutation of item indices, position 1 first.
using Ranking = std::vector<int>;

constexpr std::size_t kEnumerationLimit = 8;

inline bool is_permutation_of(const Ranking& r, std::size_t n) {
  if (r.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (int i : r) {
    if (i < 0 || static_cast<std::size_t>(i) >= n || seen[i]) return false;
    seen[i] = 1;
  }
  return true;
}

// Standard Gumbel variate from a uniform; the input is clamped to
// [2^-32, 1 - 2^-32] so boundary points stay finite.
inline double gumbel_transform(double u) {
  constexpr double eps = 0x1.0p-32;
  u = std::clamp(u, eps, 1.0 - eps);
  return -std::log(-std::log(u));
}

// Ranking for one uniform row: descending argsort of s_i + g(u_i), ties
// broken by item index so output is reproducible.
inline Ranking rank_from_uniforms(const Scores& scores,
                                  std::span<const double> u) {
  if (u.size() != scores.size())
    throw std::invalid_argument("uniform row length != score count");
  const std::size_t k = scores.size();
  std::vector<double> perturbed(k);
  for (std::size_t i = 0; i < k; ++i)
    perturbed[i] = scores[i] + gumbel_transform(u[i]);
  Ranking order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (perturbed[a] != perturbed[b]) return perturbed[a] > perturbed[b];
    return a < b;
  });
  return order;
}

// One ranking per point-set row.
inline std::vector<Ranking> sample_rankings(const Scores& scores,
                                            const lowdisc::PointSet& points) {
  if (points.d != scores.size())
    throw std::invalid_argument("point-set dimension != score count");
  std::vector<Ranking> out;
  out.reserve(points.n);
  for (std::size_t i = 0; i < points.n; ++i)
    out.push_back(rank_from_uniforms(scores, points.row(i)));
  return out;
}

// log pi(r | s): sum over positions of s_{r_j} - logsumexp(remaining).
// The suffix logsumexp runs back to front, one logaddexp per step.
inline double log_prob(const Ranking& ranking, const Scores& scores) {
  const std::size_t k = scores.size();
  if (!is_permutation_of(ranking, k))
    throw std::invalid_argument("ranking is not a permutation of the items");
  double lse = scores[ranking[k - 1]];
  double total = 0.0;  // last factor is log(1) = 0
  for (std::size_t j = k - 1; j-- > 0;) {
    const double s = scores[ranking[j]];
    const double hi = std::max(lse, s);
    lse = hi + std::log1p(std::exp(std::min(lse, s) - hi));
    total += s - lse;
  }
  return total;
}

// d log pi / d s. Each step contributes e_{r_j} minus the softmax over the
// remaining items, so the entries sum to zero.
inline std::vector<double> log_prob_grad(const Ranking& ranking,
                                         const Scores& scores) {
  const std::size_t k = scores.size();
  if (!is_permutation_of(ranking, k))
    throw std::invalid_argument("ranking is not a permutation of the items");
  std::vector<double> grad(k, 0.0);
  std::vector<double> w(k);
  for (std::size_t j = 0; j + 1 < k; ++j) {
    double hi = scores[ranking[j]];
    for (std::size_t l = j + 1; l < k; ++l)
      hi = std::max(hi, scores[ranking[l]]);
    double z = 0.0;
    for (std::size_t l = j; l < k; ++l) {
      w[l] = std::exp(scores[ranking[l]] - hi);
      z += w[l];
    }
    grad[ranking[j]] += 1.0;
    for (std::size_t l = j; l < k; ++l) grad[ranking[l]] -= w[l] / z;
  }
  return grad;
}

// All |q|! rankings with exact PL probabilities. Oracle-sized lists only.
inline std::vector<std::pair<Ranking, double>> enumerate_pl(
    const Scores& scores) {
  const std::size_t k = scores.size();
  if (k == 0) throw std::invalid_argument("empty score vector");
  if (k > kEnumerationLimit)
    throw size_limit_error("enumeration limited to " +
                           std::to_string(kEnumerationLimit) + " items, got " +
                           std::to_string(k));
  Ranking perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::pair<Ranking, double>> out;
  do {
    out.emplace_back(perm, std::exp(log_prob(perm, scores)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace qmcrank::pl
