#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qmcrank/dataio.hpp"
#include "qmcrank/detail/parallel.hpp"
#include "qmcrank/gumbel_pl.hpp"
#include "qmcrank/lowdisc.hpp"
#include "qmcrank/metrics.hpp"
#include "qmcrank/rng.hpp"

namespace qmcrank::scorer {

enum class Architecture { Linear, Mlp };

// Parameterized scoring function h: feature vector -> score. The MLP is one
// hidden tanh layer with biases and a scalar output head; parameters are a
// flat vector laid out [W1 row-major | b1 | w2 | b2].
struct Scorer {
  Architecture arch = Architecture::Linear;
  std::size_t feature_dim = 0;
  std::size_t hidden = 0;       // MLP only
  bool linear_bias = false;     // Linear only
  std::vector<double> weights;
};

inline std::size_t param_count(Architecture arch, std::size_t feature_dim,
                               std::size_t hidden, bool linear_bias) {
  if (arch == Architecture::Linear)
    return feature_dim + (linear_bias ? 1 : 0);
  return hidden * feature_dim + hidden + hidden + 1;
}

// Fan-in uniform initialization in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
inline Scorer init_scorer(Architecture arch, std::size_t feature_dim,
                          std::size_t hidden, std::uint64_t seed,
                          bool linear_bias = false) {
  if (feature_dim == 0) throw std::invalid_argument("feature_dim must be > 0");
  if (arch == Architecture::Mlp && hidden == 0)
    throw std::invalid_argument("MLP needs hidden width > 0");
  Scorer s{arch, feature_dim, arch == Architecture::Mlp ? hidden : 0,
           linear_bias, {}};
  s.weights.resize(param_count(arch, feature_dim, hidden, linear_bias));
  rng::Stream stream(rng::mix(seed, 0x494e4954u));
  auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = begin; i < end; ++i)
      s.weights[i] = bound * (2.0 * stream.uniform() - 1.0);
  };
  if (arch == Architecture::Linear) {
    fill(0, s.weights.size(), feature_dim);
  } else {
    const std::size_t w1 = hidden * feature_dim;
    fill(0, w1 + hidden, feature_dim);              // W1 and b1
    fill(w1 + hidden, s.weights.size(), hidden);    // w2 and b2
  }
  return s;
}

// Scores for every item of a query (features row-major, one row per item).
inline pl::Scores score(const Scorer& s, std::span<const double> features,
                        std::size_t n_items) {
  if (n_items == 0 || features.size() != n_items * s.feature_dim)
    throw std::invalid_argument("feature block does not match scorer");
  pl::Scores out(n_items, 0.0);
  if (s.arch == Architecture::Linear) {
    for (std::size_t i = 0; i < n_items; ++i) {
      double acc = s.linear_bias ? s.weights[s.feature_dim] : 0.0;
      for (std::size_t j = 0; j < s.feature_dim; ++j)
        acc += s.weights[j] * features[i * s.feature_dim + j];
      out[i] = acc;
    }
    return out;
  }
  const std::size_t h = s.hidden, d = s.feature_dim;
  const double* w1 = s.weights.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  for (std::size_t i = 0; i < n_items; ++i) {
    double acc = b2;
    for (std::size_t r = 0; r < h; ++r) {
      double z = b1[r];
      for (std::size_t j = 0; j < d; ++j)
        z += w1[r * d + j] * features[i * d + j];
      acc += w2[r] * std::tanh(z);
    }
    out[i] = acc;
  }
  return out;
}

inline pl::Scores score(const Scorer& s, const dataio::Query& q) {
  return score(s, q.features, q.n_items);
}

// Exact gradient of sum_i upstream[i] * s_i with respect to the parameters.
inline std::vector<double> backprop_scores(const Scorer& s,
                                           std::span<const double> features,
                                           std::size_t n_items,
                                           std::span<const double> upstream) {
  if (upstream.size() != n_items ||
      features.size() != n_items * s.feature_dim)
    throw std::invalid_argument("backprop shapes do not match scorer");
  std::vector<double> grad(s.weights.size(), 0.0);
  if (s.arch == Architecture::Linear) {
    for (std::size_t i = 0; i < n_items; ++i) {
      for (std::size_t j = 0; j < s.feature_dim; ++j)
        grad[j] += upstream[i] * features[i * s.feature_dim + j];
      if (s.linear_bias) grad[s.feature_dim] += upstream[i];
    }
    return grad;
  }
  const std::size_t h = s.hidden, d = s.feature_dim;
  const double* w1 = s.weights.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + h * d;
  double* g_w2 = g_b1 + h;
  double* g_b2 = g_w2 + h;
  for (std::size_t i = 0; i < n_items; ++i) {
    const double u = upstream[i];
    g_b2[0] += u;
    for (std::size_t r = 0; r < h; ++r) {
      double z = b1[r];
      for (std::size_t j = 0; j < d; ++j)
        z += w1[r * d + j] * features[i * d + j];
      const double t = std::tanh(z);
      g_w2[r] += u * t;
      const double dz = u * w2[r] * (1.0 - t * t);
      g_b1[r] += dz;
      for (std::size_t j = 0; j < d; ++j)
        g_w1[r * d + j] += dz * features[i * d + j];
    }
  }
  return grad;
}

inline std::vector<double> backprop_scores(const Scorer& s,
                                           const dataio::Query& q,
                                           std::span<const double> upstream) {
  return backprop_scores(s, q.features, q.n_items, upstream);
}

// ---- checkpoint file -------------------------------------------------------
// Layout (little-endian): 8-byte magic "QMCRNK01", u32 architecture
// (0 = linear, 1 = mlp), u32 feature_dim, u32 hidden, u32 flags (bit 0 =
// linear bias), u64 parameter count, then the parameters as f64.

constexpr char kCheckpointMagic[9] = "QMCRNK01";

namespace detail_ {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail_

inline void save_checkpoint(const Scorer& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 8);
  detail_::put_u32(out, s.arch == Architecture::Linear ? 0u : 1u);
  detail_::put_u32(out, static_cast<std::uint32_t>(s.feature_dim));
  detail_::put_u32(out, static_cast<std::uint32_t>(s.hidden));
  detail_::put_u32(out, s.linear_bias ? 1u : 0u);
  detail_::put_u64(out, s.weights.size());
  for (double w : s.weights) {
    std::uint64_t bits;
    std::memcpy(&bits, &w, 8);
    detail_::put_u64(out, bits);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Scorer load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  Scorer s;
  const std::uint32_t arch = detail_::get_u32(in);
  s.arch = arch == 0 ? Architecture::Linear : Architecture::Mlp;
  s.feature_dim = detail_::get_u32(in);
  s.hidden = detail_::get_u32(in);
  s.linear_bias = (detail_::get_u32(in) & 1u) != 0;
  const std::uint64_t count = detail_::get_u64(in);
  if (count != param_count(s.arch, s.feature_dim, s.hidden, s.linear_bias))
    throw std::runtime_error("checkpoint parameter count mismatch in " + path);
  s.weights.resize(count);
  for (auto& w : s.weights) {
    const std::uint64_t bits = detail_::get_u64(in);
    std::memcpy(&w, &bits, 8);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return s;
}

// ---- PG-rank online training ----------------------------------------------

// How the per-sample reward Delta is built during training. ClickIps mimics
// online click feedback: clicks on one displayed ranking, inverse position
// bias as the IPS weight, DCG discount over the sampled ranking. TrueRelevance
// uses the dataset grades directly (full-information).
enum class RewardMode { ClickIps, TrueRelevance };

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 1000;
  std::size_t mc_samples = 8;
  lowdisc::SequenceKind kind = lowdisc::SequenceKind::SobolScrambled;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  RewardMode reward = RewardMode::ClickIps;
  std::size_t threads = 1;
};

struct TrainRecord {
  std::size_t batch_idx;
  double dcg;
  double ctr;
  double loss;
  double grad_norm_sq;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  Scorer final_scorer;
};

// One SGD pass: per batch, evaluate out-of-sample metrics with the current
// parameters (display one sampled ranking per query, simulate clicks), then
// take one step on the score-function gradient. Metrics are logged before the
// update so every row reflects unseen data.
inline TrainLog train_pg_rank(
    const dataio::Dataset& data, Scorer model, const TrainConfig& cfg,
    const std::function<void(const TrainRecord&)>& hook = {}) {
  if (cfg.batch_size == 0 || cfg.mc_samples == 0 || cfg.epochs == 0)
    throw std::invalid_argument("train config counts must be positive");
  if (cfg.learning_rate < 0)
    throw std::invalid_argument("learning rate must be >= 0");
  if (data.queries.empty()) throw std::invalid_argument("empty dataset");

  TrainLog log;
  const std::size_t n_queries = data.queries.size();
  std::size_t batch_idx = 0;

  struct PerQuery {
    double dcg = 0.0;
    double clicks = 0.0;
    double loss_sum = 0.0;  // sum over samples of log pi * Delta
    std::vector<double> grad;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t start = 0; start < n_queries;
         start += cfg.batch_size, ++batch_idx) {
      const std::size_t q_count =
          std::min(cfg.batch_size, n_queries - start);
      std::vector<PerQuery> per_query(q_count);

      qmcrank::detail::parallel_for(q_count, cfg.threads, [&](std::size_t qi) {
        const dataio::Query& q = data.queries[start + qi];
        PerQuery& slot = per_query[qi];
        const pl::Scores scores = score(model, q);
        const std::size_t k = q.n_items;

        // Display one ranking and simulate user feedback on it.
        rng::Stream display(rng::mix(cfg.seed, 0xd157u, batch_idx, qi));
        std::vector<double> u_disp(k), u_click(k);
        for (double& u : u_disp) u = display.uniform();
        for (double& u : u_click) u = display.uniform();
        const pl::Ranking shown = pl::rank_from_uniforms(scores, u_disp);
        const metrics::ClickVector clicks =
            metrics::simulate_clicks(shown, q.rel, u_click, data.max_grade);
        slot.dcg = metrics::dcg(shown, q.rel);
        for (auto c : clicks) slot.clicks += c;

        // Reward gains per item for the sampled rankings.
        std::vector<double> gains(k, 0.0);
        if (cfg.reward == RewardMode::TrueRelevance) {
          gains.assign(q.rel.begin(), q.rel.end());
        } else {
          for (std::size_t pos = 0; pos < k; ++pos)
            if (clicks[pos])
              gains[shown[pos]] += static_cast<double>(pos + 1);
        }

        const lowdisc::PointSet points = lowdisc::generate(
            cfg.kind, cfg.mc_samples, k,
            rng::mix(cfg.seed, 0x96adu, batch_idx, qi));
        std::vector<double> upstream(k, 0.0);
        for (std::size_t n = 0; n < points.n; ++n) {
          const pl::Ranking r = pl::rank_from_uniforms(scores, points.row(n));
          const double delta = metrics::dcg(r, gains);
          slot.loss_sum += pl::log_prob(r, scores) * delta;
          const std::vector<double> g = pl::log_prob_grad(r, scores);
          for (std::size_t i = 0; i < k; ++i) upstream[i] += g[i] * delta;
        }
        const double inv_n = 1.0 / static_cast<double>(points.n);
        for (double& u : upstream) u *= inv_n;
        slot.grad = backprop_scores(model, q, upstream);
      });

      // Fixed-order reduction keeps output independent of thread count.
      std::vector<double> grad(model.weights.size(), 0.0);
      double dcg_sum = 0.0, click_sum = 0.0, loss_sum = 0.0;
      for (const PerQuery& slot : per_query) {
        dcg_sum += slot.dcg;
        click_sum += slot.clicks;
        loss_sum += slot.loss_sum;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += slot.grad[i];
      }
      const double inv_q = 1.0 / static_cast<double>(q_count);
      double norm_sq = 0.0;
      for (double& g : grad) {
        g *= inv_q;
        norm_sq += g * g;
      }
      if (!std::isfinite(norm_sq))
        throw std::runtime_error("training aborted: non-finite gradient at batch " +
                                 std::to_string(batch_idx));

      TrainRecord rec{batch_idx, dcg_sum * inv_q, click_sum * inv_q,
                      -loss_sum * inv_q /
                          static_cast<double>(cfg.mc_samples),
                      norm_sq};
      log.records.push_back(rec);
      if (hook) hook(rec);

      // `grad` estimates the utility gradient; SGD ascends it (equivalently,
      // descends the logged loss).
      for (std::size_t i = 0; i < grad.size(); ++i)
        model.weights[i] += cfg.learning_rate * grad[i];
    }
  }
  log.final_scorer = std::move(model);
  return log;
}

// CSV projection with the documented stable header.
inline dataio::ResultTable to_table(const TrainLog& log) {
  dataio::ResultTable t;
  t.header = {"batch_idx", "dcg", "ctr", "loss", "grad_norm_sq"};
  for (const auto& r : log.records)
    t.rows.push_back({std::to_string(r.batch_idx), dataio::format_double(r.dcg),
                      dataio::format_double(r.ctr),
                      dataio::format_double(r.loss),
                      dataio::format_double(r.grad_norm_sq)});
  return t;
}

}  // namespace qmcrank::scorer
