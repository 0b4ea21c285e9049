#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "qmcrank/errors.hpp"
#include "qmcrank/metrics.hpp"
#include "qmcrank/rng.hpp"

namespace qmcrank::dataio {

// One query: the unit of ranking. features is |q| x feature_dim, row-major.
struct Query {
  std::string qid;
  std::size_t n_items = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features;
  metrics::RelevanceVector rel;

  std::span<const double> item(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
};

struct Dataset {
  std::vector<Query> queries;
  std::size_t feature_dim = 0;
  double max_grade = 0.0;
};

// libsvm-with-qid reader: `<grade> qid:<id> <idx>:<val> ...`, 1-based
// ascending feature indices, `#` starts a comment. Consecutive lines with the
// same qid form one query; a qid reappearing later starts a new query.
inline Dataset parse_libsvm_qid(std::istream& in) {
  struct Item {
    double grade;
    std::vector<std::pair<std::size_t, double>> feats;
  };
  std::string qid_run;
  std::vector<Item> run;
  std::vector<std::pair<std::string, std::vector<Item>>> groups;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;

  auto flush_run = [&] {
    if (!run.empty()) groups.emplace_back(qid_run, std::move(run));
    run.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos)
      line.resize(pos);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank or comment-only line

    Item item;
    try {
      std::size_t used = 0;
      item.grade = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw parse_error("expected numeric relevance grade, got '" + tok + "'",
                        line_no);
    }

    if (!(ls >> tok) || tok.rfind("qid:", 0) != 0 || tok.size() <= 4)
      throw parse_error("expected qid:<id> after the grade", line_no);
    std::string qid = tok.substr(4);

    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0)
        throw parse_error("expected <index>:<value>, got '" + tok + "'",
                          line_no);
      std::size_t idx = 0;
      double val = 0.0;
      try {
        idx = std::stoul(tok.substr(0, colon));
        std::size_t used = 0;
        const std::string vs = tok.substr(colon + 1);
        val = std::stod(vs, &used);
        if (used != vs.size()) throw std::invalid_argument(vs);
      } catch (const std::exception&) {
        throw parse_error("bad feature pair '" + tok + "'", line_no);
      }
      if (idx == 0)
        throw parse_error("feature indices are 1-based", line_no);
      if (!item.feats.empty() && idx <= item.feats.back().first)
        throw parse_error("feature indices must be ascending", line_no);
      item.feats.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }

    if (qid != qid_run) {
      flush_run();
      qid_run = qid;
    }
    run.push_back(std::move(item));
  }
  flush_run();

  if (groups.empty()) throw empty_dataset_error("no data lines in input");

  Dataset ds;
  ds.feature_dim = max_index;
  for (auto& [qid, items] : groups) {
    Query q;
    q.qid = qid;
    q.n_items = items.size();
    q.feature_dim = ds.feature_dim;
    q.features.assign(items.size() * ds.feature_dim, 0.0);
    q.rel.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      q.rel.push_back(items[i].grade);
      ds.max_grade = std::max(ds.max_grade, items[i].grade);
      for (const auto& [idx, val] : items[i].feats)
        q.features[i * ds.feature_dim + (idx - 1)] = val;
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

inline Dataset parse_libsvm_qid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open data file: " + path);
  return parse_libsvm_qid(in);
}

// Synthetic query stream: seeded Gaussian features; grade 1 iff the hidden
// linear model's score exceeds the per-query median, giving balanced labels.
inline Dataset synthetic_stream(std::size_t n_items, std::size_t feature_dim,
                                std::size_t n_queries, std::uint64_t seed) {
  if (n_items == 0 || feature_dim == 0 || n_queries == 0)
    throw std::invalid_argument("synthetic stream sizes must be positive");
  Dataset ds;
  ds.feature_dim = feature_dim;
  ds.max_grade = 1.0;
  std::vector<double> hidden(feature_dim);
  rng::Stream hidden_stream(rng::mix(seed, 0x48494444u));
  for (double& w : hidden) w = hidden_stream.gaussian();

  rng::Stream stream(rng::mix(seed, 0x53594e54u));
  for (std::size_t qi = 0; qi < n_queries; ++qi) {
    Query q;
    q.qid = "syn" + std::to_string(qi);
    q.n_items = n_items;
    q.feature_dim = feature_dim;
    q.features.resize(n_items * feature_dim);
    for (double& v : q.features) v = stream.gaussian();
    std::vector<double> latent(n_items, 0.0);
    for (std::size_t i = 0; i < n_items; ++i)
      for (std::size_t j = 0; j < feature_dim; ++j)
        latent[i] += hidden[j] * q.features[i * feature_dim + j];
    std::vector<double> sorted = latent;
    std::sort(sorted.begin(), sorted.end());
    const double median = n_items % 2 == 1
                              ? sorted[n_items / 2]
                              : 0.5 * (sorted[n_items / 2 - 1] +
                                       sorted[n_items / 2]);
    q.rel.resize(n_items);
    for (std::size_t i = 0; i < n_items; ++i)
      q.rel[i] = latent[i] > median ? 1.0 : 0.0;
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

// Experiment output table: a fixed header plus pre-rendered cells.
struct ResultTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// 17 significant digits: round-trip exact for doubles.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with a stable header, UTF-8, LF line endings.
inline void write_results(const ResultTable& table, const std::string& path) {
  if (table.rows.empty())
    throw std::invalid_argument("refusing to write an empty result table");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  auto write_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  write_row(table.header);
  for (const auto& row : table.rows) write_row(row);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace qmcrank::dataio
