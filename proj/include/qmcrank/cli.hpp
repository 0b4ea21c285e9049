#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qmcrank/dataio.hpp"
#include "qmcrank/estimators.hpp"
#include "qmcrank/lowdisc.hpp"
#include "qmcrank/propensity.hpp"
#include "qmcrank/scorer.hpp"

namespace qmcrank::cli {

using lowdisc::SequenceKind;

inline SequenceKind parse_kind(const std::string& name) {
  if (name == "MC") return SequenceKind::MC;
  if (name == "Halton") return SequenceKind::Halton;
  if (name == "QMC" || name == "SobolScrambled")
    return SequenceKind::SobolScrambled;
  throw CLI::ValidationError("--kinds", "unknown sequence kind '" + name +
                                            "' (use MC, Halton, or QMC)");
}

namespace detail_ {

// Flag-name -> resolved-value map; dumped to run_metadata.json so a run can
// be reproduced exactly from its recorded configuration.
using FlagMap = std::map<std::string, std::string>;

inline std::string default_out_dir() {
  if (const char* env = std::getenv("QMCRANK_OUT"); env && *env) return env;
  return ".";
}

inline void write_metadata(const std::string& out_dir,
                           const std::string& subcommand,
                           const FlagMap& flags) {
  nlohmann::json meta;
  meta["tool"] = "qmcrank";
  meta["subcommand"] = subcommand;
  meta["flags"] = flags;
  std::ofstream out(std::filesystem::path(out_dir) / "run_metadata.json",
                    std::ios::binary);
  if (!out) throw std::runtime_error("cannot write run metadata in " + out_dir);
  out << meta.dump(2) << "\n";
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory " + dir + ": " +
                             ec.message());
}

inline std::vector<std::size_t> pow2_grid(std::size_t lo, std::size_t hi) {
  if (lo > hi || hi > 30)
    throw CLI::ValidationError("--n-min-log2/--n-max-log2",
                               "need min <= max <= 30");
  std::vector<std::size_t> grid;
  for (std::size_t e = lo; e <= hi; ++e)
    grid.push_back(static_cast<std::size_t>(1) << e);
  return grid;
}

inline std::string join_sizes(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(xs[i]);
  }
  return s;
}

// Prints each distinct warning once per run.
struct DedupWarnings {
  std::function<void(const std::string&)> previous;
  std::set<std::string> seen;
  DedupWarnings() {
    previous = lowdisc::warning_handler();
    lowdisc::warning_handler() = [this](const std::string& msg) {
      if (seen.insert(msg).second) std::cerr << "warning: " << msg << "\n";
    };
  }
  ~DedupWarnings() { lowdisc::warning_handler() = previous; }
};

}  // namespace detail_

// Command-line entry point, returns the process exit code: 0 success,
// 1 runtime failure, 2 usage error.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Plackett-Luce expectation estimation with MC and QMC sampling"};
  app.require_subcommand(1);

  // ---- propensity-mse -------------------------------------------------------
  auto* mse = app.add_subcommand(
      "propensity-mse",
      "Sweep propensity-estimation MSE over sample counts for MC and QMC");
  std::vector<std::size_t> mse_sizes{5, 25, 50};
  std::size_t mse_nmin = 2, mse_nmax = 10, mse_reps = 200, mse_threads = 1;
  std::uint64_t mse_seed = 1;
  std::string mse_out = detail_::default_out_dir();
  bool mse_quick = false;
  auto* mse_sizes_opt = mse->add_option("--list-sizes", mse_sizes,
                                        "Comma-separated list sizes")
                            ->delimiter(',');
  auto* mse_nmin_opt =
      mse->add_option("--n-min-log2", mse_nmin, "Smallest sample count, log2");
  auto* mse_nmax_opt =
      mse->add_option("--n-max-log2", mse_nmax, "Largest sample count, log2");
  auto* mse_reps_opt =
      mse->add_option("--reps", mse_reps, "Replications per grid point");
  mse->add_option("--seed", mse_seed, "Master seed");
  mse->add_option("--out", mse_out, "Output directory");
  mse->add_option("--threads", mse_threads, "Worker thread cap");
  mse->add_flag("--quick", mse_quick, "Reduced desk-scale preset");

  // ---- variance-decomposition -----------------------------------------------
  auto* vd = app.add_subcommand(
      "variance-decomposition",
      "Law-of-total-variance decomposition of the utility estimator");
  std::size_t vd_q = 8, vd_nmin = 2, vd_nmax = 8, vd_outer = 100,
              vd_inner = 100, vd_list_size = 5, vd_pool = 256,
              vd_feature_dim = 10, vd_threads = 1;
  std::uint64_t vd_seed = 1;
  std::vector<std::string> vd_kinds{"MC", "QMC"};
  std::string vd_metric = "utility";
  std::string vd_out = detail_::default_out_dir();
  bool vd_quick = false;
  auto* vd_q_opt = vd->add_option("--q", vd_q, "Query batch size Q");
  auto* vd_nmin_opt =
      vd->add_option("--n-min-log2", vd_nmin, "Smallest N, log2");
  auto* vd_nmax_opt = vd->add_option("--n-max-log2", vd_nmax, "Largest N, log2");
  auto* vd_outer_opt =
      vd->add_option("--outer-reps", vd_outer, "Outer (batch) replications");
  auto* vd_inner_opt =
      vd->add_option("--inner-reps", vd_inner, "Inner (sampling) replications");
  vd->add_option("--kinds", vd_kinds, "Sequence kinds (MC, Halton, QMC)")
      ->delimiter(',');
  auto* vd_pool_opt =
      vd->add_option("--pool-size", vd_pool, "Synthetic query pool size");
  vd->add_option("--list-size", vd_list_size, "Items per query");
  vd->add_option("--feature-dim", vd_feature_dim, "Synthetic feature dim");
  vd->add_option("--metric", vd_metric,
                 "Harness statistic: utility or grad-norm")
      ->check(CLI::IsMember({"utility", "grad-norm"}));
  vd->add_option("--seed", vd_seed, "Master seed");
  vd->add_option("--out", vd_out, "Output directory");
  vd->add_option("--threads", vd_threads, "Worker thread cap");
  vd->add_flag("--quick", vd_quick, "Reduced desk-scale preset");

  // ---- train -----------------------------------------------------------------
  auto* tr = app.add_subcommand(
      "train", "Online PG-rank training with simulated click feedback");
  std::string tr_data;
  bool tr_synthetic = false;
  std::size_t tr_items = 100, tr_fdim = 10, tr_queries = 20000,
              tr_batch = 1000, tr_samples = 8, tr_epochs = 1, tr_hidden = 64,
              tr_threads = 1;
  double tr_lr = -1.0;  // resolved after parse: 0.1 synthetic, 0.001 file
  std::uint64_t tr_seed = 1;
  std::string tr_kind = "QMC", tr_arch = "mlp", tr_reward = "clicks";
  std::string tr_out = detail_::default_out_dir();
  bool tr_quick = false;
  tr->add_option("--data", tr_data, "libsvm-with-qid input file");
  tr->add_flag("--synthetic", tr_synthetic, "Use the synthetic query stream");
  auto* tr_items_opt =
      tr->add_option("--n-items", tr_items, "Items per synthetic query");
  auto* tr_fdim_opt =
      tr->add_option("--feature-dim", tr_fdim, "Synthetic feature dim");
  auto* tr_queries_opt =
      tr->add_option("--n-queries", tr_queries, "Synthetic stream length");
  auto* tr_batch_opt = tr->add_option("--batch-size", tr_batch, "Batch size Q");
  tr->add_option("--mc-samples", tr_samples, "PL samples per query N");
  tr->add_option("--mc-type", tr_kind, "Uniform driver: MC or QMC")
      ->check(CLI::IsMember({"MC", "QMC"}));
  auto* tr_lr_opt = tr->add_option("--learning-rate", tr_lr, "SGD step size");
  tr->add_option("--epochs", tr_epochs, "Passes over the data");
  tr->add_option("--arch", tr_arch, "Scorer architecture")
      ->check(CLI::IsMember({"linear", "mlp"}));
  tr->add_option("--hidden", tr_hidden, "MLP hidden width");
  tr->add_option("--reward", tr_reward,
                 "Training reward: clicks (IPS-corrected) or relevance")
      ->check(CLI::IsMember({"clicks", "relevance"}));
  tr->add_option("--seed", tr_seed, "Master seed");
  tr->add_option("--out", tr_out, "Output directory");
  tr->add_option("--threads", tr_threads, "Worker thread cap");
  tr->add_flag("--quick", tr_quick, "Reduced desk-scale preset");

  // CLI11 wants argv-style input.
  std::vector<const char*> argv;
  argv.push_back("qmcrank");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  detail_::DedupWarnings dedup;
  try {
    if (mse->parsed()) {
      if (mse_quick) {
        if (!mse_sizes_opt->count()) mse_sizes = {5};
        if (!mse_nmin_opt->count()) mse_nmin = 2;
        if (!mse_nmax_opt->count()) mse_nmax = 8;
        if (!mse_reps_opt->count()) mse_reps = 50;
      }
      propensity::MseConfig cfg;
      cfg.list_sizes = mse_sizes;
      cfg.n_grid = detail_::pow2_grid(mse_nmin, mse_nmax);
      cfg.replications = mse_reps;
      cfg.kinds = {SequenceKind::MC, SequenceKind::SobolScrambled};
      cfg.seed = mse_seed;
      cfg.threads = mse_threads;
      detail_::ensure_dir(mse_out);
      const propensity::MseResult result = propensity::mse_experiment(cfg);
      const auto csv = std::filesystem::path(mse_out) / "propensity_mse.csv";
      dataio::write_results(propensity::to_table(result), csv.string());
      detail_::FlagMap flags{
          {"--list-sizes", detail_::join_sizes(mse_sizes)},
          {"--n-min-log2", std::to_string(mse_nmin)},
          {"--n-max-log2", std::to_string(mse_nmax)},
          {"--reps", std::to_string(mse_reps)},
          {"--seed", std::to_string(mse_seed)},
          {"--threads", std::to_string(mse_threads)},
          {"--out", mse_out}};
      detail_::write_metadata(mse_out, "propensity-mse", flags);
      std::cout << "wrote " << csv.string() << " (" << result.rows.size()
                << " rows; reference: " << result.reference_note << ")\n";
      return 0;
    }

    if (vd->parsed()) {
      if (vd_quick) {
        if (!vd_q_opt->count()) vd_q = 4;
        if (!vd_nmin_opt->count()) vd_nmin = 2;
        if (!vd_nmax_opt->count()) vd_nmax = 6;
        if (!vd_outer_opt->count()) vd_outer = 30;
        if (!vd_inner_opt->count()) vd_inner = 30;
        if (!vd_pool_opt->count()) vd_pool = 64;
      }
      estimators::VarDecompConfig cfg;
      cfg.kinds.clear();
      for (const auto& k : vd_kinds) cfg.kinds.push_back(parse_kind(k));
      cfg.q_batch = vd_q;
      cfg.n_grid = detail_::pow2_grid(vd_nmin, vd_nmax);
      cfg.outer_reps = vd_outer;
      cfg.inner_reps = vd_inner;
      cfg.seed = vd_seed;
      cfg.threads = vd_threads;
      cfg.statistic = vd_metric == "utility"
                          ? estimators::HarnessStatistic::Utility
                          : estimators::HarnessStatistic::GradNormSq;
      const dataio::Dataset pool = dataio::synthetic_stream(
          vd_list_size, vd_feature_dim, vd_pool, rng::mix(vd_seed, 0x706f6fu));
      const scorer::Scorer model =
          scorer::init_scorer(scorer::Architecture::Linear, vd_feature_dim, 0,
                              rng::mix(vd_seed, 0x6d6f64u));
      detail_::ensure_dir(vd_out);
      const auto rows =
          estimators::variance_decomposition(pool.queries, model, cfg);
      const auto csv =
          std::filesystem::path(vd_out) / "variance_decomposition.csv";
      dataio::write_results(estimators::to_table(rows), csv.string());
      std::string kinds_str;
      for (std::size_t i = 0; i < vd_kinds.size(); ++i)
        kinds_str += (i ? "," : "") + vd_kinds[i];
      detail_::FlagMap flags{{"--q", std::to_string(vd_q)},
                             {"--n-min-log2", std::to_string(vd_nmin)},
                             {"--n-max-log2", std::to_string(vd_nmax)},
                             {"--outer-reps", std::to_string(vd_outer)},
                             {"--inner-reps", std::to_string(vd_inner)},
                             {"--kinds", kinds_str},
                             {"--pool-size", std::to_string(vd_pool)},
                             {"--list-size", std::to_string(vd_list_size)},
                             {"--feature-dim", std::to_string(vd_feature_dim)},
                             {"--metric", vd_metric},
                             {"--seed", std::to_string(vd_seed)},
                             {"--threads", std::to_string(vd_threads)},
                             {"--out", vd_out}};
      detail_::write_metadata(vd_out, "variance-decomposition", flags);
      std::cout << "wrote " << csv.string() << " (" << rows.size()
                << " rows)\n";
      return 0;
    }

    if (tr->parsed()) {
      if (!tr_synthetic && tr_data.empty()) {
        std::cerr << "usage error: train needs --data <path> or --synthetic\n";
        return 2;
      }
      if (tr_synthetic && !tr_data.empty()) {
        std::cerr << "usage error: --data and --synthetic are exclusive\n";
        return 2;
      }
      if (tr_quick) {
        if (!tr_items_opt->count()) tr_items = 20;
        if (!tr_fdim_opt->count()) tr_fdim = 10;
        if (!tr_queries_opt->count()) tr_queries = 1280;
        if (!tr_batch_opt->count()) tr_batch = 64;
      }
      if (!tr_lr_opt->count()) tr_lr = tr_synthetic ? 0.1 : 0.001;

      const dataio::Dataset data =
          tr_synthetic
              ? dataio::synthetic_stream(tr_items, tr_fdim, tr_queries,
                                         rng::mix(tr_seed, 0x646174u))
              : dataio::parse_libsvm_qid_file(tr_data);

      scorer::TrainConfig cfg;
      cfg.learning_rate = tr_lr;
      cfg.batch_size = tr_batch;
      cfg.mc_samples = tr_samples;
      cfg.kind = parse_kind(tr_kind);
      cfg.epochs = tr_epochs;
      cfg.seed = tr_seed;
      cfg.reward = tr_reward == "clicks" ? scorer::RewardMode::ClickIps
                                         : scorer::RewardMode::TrueRelevance;
      cfg.threads = tr_threads;

      const scorer::Scorer initial = scorer::init_scorer(
          tr_arch == "linear" ? scorer::Architecture::Linear
                              : scorer::Architecture::Mlp,
          data.feature_dim, tr_hidden, rng::mix(tr_seed, 0x696e69u));

      detail_::ensure_dir(tr_out);
      const scorer::TrainLog log = scorer::train_pg_rank(data, initial, cfg);
      const auto csv = std::filesystem::path(tr_out) / "training_log.csv";
      dataio::write_results(scorer::to_table(log), csv.string());
      const auto ckpt = std::filesystem::path(tr_out) / "checkpoint.bin";
      scorer::save_checkpoint(log.final_scorer, ckpt.string());
      detail_::FlagMap flags{
          {"--n-items", std::to_string(tr_items)},
          {"--feature-dim", std::to_string(tr_fdim)},
          {"--n-queries", std::to_string(tr_queries)},
          {"--batch-size", std::to_string(tr_batch)},
          {"--mc-samples", std::to_string(tr_samples)},
          {"--mc-type", tr_kind},
          {"--learning-rate", dataio::format_double(tr_lr)},
          {"--epochs", std::to_string(tr_epochs)},
          {"--arch", tr_arch},
          {"--hidden", std::to_string(tr_hidden)},
          {"--reward", tr_reward},
          {"--seed", std::to_string(tr_seed)},
          {"--threads", std::to_string(tr_threads)},
          {"--out", tr_out}};
      if (tr_synthetic)
        flags["--synthetic"] = "true";
      else
        flags["--data"] = tr_data;
      detail_::write_metadata(tr_out, "train", flags);
      std::cout << "wrote " << csv.string() << " (" << log.records.size()
                << " batches) and " << ckpt.string() << "\n";
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Rebuilds the argument list from a run_metadata.json written by run_cli.
inline std::vector<std::string> args_from_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metadata: " + path);
  nlohmann::json meta = nlohmann::json::parse(in);
  std::vector<std::string> args{meta.at("subcommand").get<std::string>()};
  for (const auto& [flag, value] :
       meta.at("flags").get<std::map<std::string, std::string>>()) {
    if (value == "true") {
      args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace qmcrank::cli
