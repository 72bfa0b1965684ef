#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "distrank/config.hpp"
#include "distrank/metrics.hpp"
#include "distrank/model.hpp"
#include "distrank/sampling.hpp"
#include "distrank/stats.hpp"
#include "distrank/train.hpp"

namespace distrank {

namespace detail {

inline std::string timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return buf;
}

inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Resolves the run directory: an explicit override, or
/// <output_dir>/<name>-<confighash>-<timestamp>.
inline std::filesystem::path make_run_dir(const experiment_config& config,
                                          const std::string& override_dir) {
  namespace fs = std::filesystem;
  fs::path dir = override_dir.empty()
                     ? fs::path(config.output_dir) /
                           (config.name + "-" + config_hash(config) + "-" + detail::timestamp_now())
                     : fs::path(override_dir);
  fs::create_directories(dir);
  return dir;
}

inline void write_history(const train_result& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch\ttrain_loss\tval_ndcg1\tbest\n";
  for (const auto& r : result.history)
    out << r.epoch << '\t' << detail::g17(r.train_loss) << '\t' << detail::g17(r.val_ndcg1)
        << '\t' << (r.best ? 1 : 0) << '\n';
}

inline void write_report_json(const metric_report& report, const std::string& path) {
  nlohmann::json topics = nlohmann::json::object();
  for (std::size_t t = 0; t < report.topics.size(); ++t) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t m = 0; m < report.measures.size(); ++m)
      row[report.measures[m]] = report.values[t][m];
    topics[report.topics[t]] = std::move(row);
  }
  nlohmann::json mean = nlohmann::json::object();
  for (std::size_t m = 0; m < report.measures.size(); ++m)
    mean[report.measures[m]] = report.means[m];
  nlohmann::json j = {{"measures", report.measures}, {"topics", topics}, {"mean", mean}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

struct train_outcome {
  std::filesystem::path run_dir;
  std::vector<double> fold_val_ndcg1;
  std::vector<std::filesystem::path> checkpoints;
};

/// Trains one model per fold; writes per-fold history and best-validation
/// checkpoints plus a copy of the resolved config into the run directory.
inline train_outcome cmd_train(const experiment_config& config,
                               const std::string& override_dir = "",
                               std::ostream& log = std::cout) {
  config.validate();  // incompatibilities surface before any training
  const loss_spec& spec = loss_by_name(config.loss);

  auto ds = load_folds(config.dataset.path, config.dataset.folds, config.parse_opts(),
                       config.dataset.dists);

  train_outcome outcome;
  outcome.run_dir = make_run_dir(config, override_dir);
  save_config(config, (outcome.run_dir / "config.json").string());

  for (std::size_t fi = 0; fi < ds.folds.size(); ++fi) {
    const int fold_id = config.dataset.folds[fi];
    ranker_config rc;
    rc.feature_dim = ds.feature_dim;
    rc.heads = config.model.heads;
    rc.expansion = config.model.expansion;
    rc.hidden = config.model.hidden;
    if (spec.space == score_space::softmax) {
      rc.output = head_kind::softmax;
      rc.num_classes = static_cast<std::size_t>(ds.num_grades);
    }
    auto model = ranker_model::init(rc, config.training.seed + static_cast<std::uint64_t>(fold_id));

    auto opts = config.train_opts();
    opts.seed = config.training.seed + static_cast<std::uint64_t>(fold_id);
    const auto result = train_ranker(model, ds.folds[fi].train, ds.folds[fi].validation, opts);

    const auto tag = "fold" + std::to_string(fold_id);
    write_history(result, (outcome.run_dir / (tag + "_history.tsv")).string());
    const auto ckpt = outcome.run_dir / (tag + ".ckpt");
    model.save(ckpt.string());
    outcome.checkpoints.push_back(ckpt);
    outcome.fold_val_ndcg1.push_back(result.best_val_ndcg1);
    log << tag << " best validation nDCG@1 = " << result.best_val_ndcg1 << " (epoch "
        << result.best_epoch << ")\n";
  }
  double mean = 0.0;
  for (double v : outcome.fold_val_ndcg1) mean += v;
  mean /= static_cast<double>(outcome.fold_val_ndcg1.size());
  log << "mean validation nDCG@1 over " << outcome.fold_val_ndcg1.size() << " fold(s) = " << mean
      << "\n";
  return outcome;
}

struct evaluate_outcome {
  std::vector<metric_report> fold_reports;
  std::vector<double> cross_fold_means;  // [measure], averaged over folds
  std::vector<std::string> measures;
};

/// Scores a split with per-fold checkpoints and writes per-fold reports plus
/// a cross-fold mean table.
inline evaluate_outcome cmd_evaluate(const experiment_config& config,
                                     const std::vector<std::string>& checkpoints,
                                     const std::string& split, const std::string& out_dir,
                                     std::ostream& log = std::cout) {
  if (checkpoints.size() != config.dataset.folds.size())
    throw std::invalid_argument("need one checkpoint per fold");
  if (split != "train" && split != "vali" && split != "test")
    throw std::invalid_argument("split must be train|vali|test");

  auto ds = load_folds(config.dataset.path, config.dataset.folds, config.parse_opts(),
                       config.dataset.dists);
  const auto opt = config.eval_opts(ds.num_grades);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  evaluate_outcome outcome;
  outcome.measures = measure_names(opt);
  outcome.cross_fold_means.assign(outcome.measures.size(), 0.0);

  for (std::size_t fi = 0; fi < ds.folds.size(); ++fi) {
    if (!fs::exists(checkpoints[fi]))
      throw std::runtime_error("checkpoint not found: " + checkpoints[fi]);
    auto model = ranker_model::load(checkpoints[fi]);
    if (model.config().feature_dim != ds.feature_dim)
      throw std::runtime_error("checkpoint feature_dim " +
                               std::to_string(model.config().feature_dim) +
                               " does not match dataset dim " + std::to_string(ds.feature_dim));

    const auto& topics = split == "train"  ? ds.folds[fi].train
                         : split == "vali" ? ds.folds[fi].validation
                                           : ds.folds[fi].test;
    std::vector<std::vector<double>> scores;
    scores.reserve(topics.size());
    for (const auto& group : topics) scores.push_back(model.eval_scores(group));

    auto report = evaluate_run(topics, scores, opt);
    const auto tag = "fold" + std::to_string(config.dataset.folds[fi]) + "_" + split;
    write_report_tsv(report, (fs::path(out_dir) / (tag + "_report.tsv")).string());
    write_report_json(report, (fs::path(out_dir) / (tag + "_report.json")).string());
    for (std::size_t m = 0; m < report.means.size(); ++m)
      outcome.cross_fold_means[m] += report.means[m];
    outcome.fold_reports.push_back(std::move(report));
  }
  for (double& v : outcome.cross_fold_means)
    v /= static_cast<double>(outcome.fold_reports.size());

  // Cross-fold table in the usual column order.
  std::ofstream table((fs::path(out_dir) / ("summary_" + split + ".tsv")).string());
  table << "fold";
  for (const auto& m : outcome.measures) table << '\t' << m;
  table << '\n';
  char buf[32];
  for (std::size_t fi = 0; fi < outcome.fold_reports.size(); ++fi) {
    table << config.dataset.folds[fi];
    for (double v : outcome.fold_reports[fi].means) {
      std::snprintf(buf, sizeof(buf), "%.4f", v);
      table << '\t' << buf;
    }
    table << '\n';
  }
  table << "MEAN";
  log << "split=" << split << '\n';
  for (std::size_t m = 0; m < outcome.measures.size(); ++m) {
    std::snprintf(buf, sizeof(buf), "%.4f", outcome.cross_fold_means[m]);
    table << '\t' << buf;
    log << "  " << outcome.measures[m] << " = " << buf << '\n';
  }
  table << '\n';
  return outcome;
}

struct compare_row {
  std::string measure;
  double mean_a = 0.0;
  double mean_b = 0.0;
  t_test_result test;
  std::string marker;  // arrow when significant at 0.05
};

/// Paired significance table of run B against baseline run A, topic-aligned.
inline std::vector<compare_row> cmd_compare(const metric_report& a, const metric_report& b,
                                            std::ostream& log = std::cout) {
  if (a.measures != b.measures)
    throw std::invalid_argument("compare: reports carry different measures");
  std::map<std::string, std::size_t> index_b;
  for (std::size_t t = 0; t < b.topics.size(); ++t) index_b[b.topics[t]] = t;
  if (a.topics.size() != b.topics.size())
    throw std::invalid_argument("compare: reports cover different topic sets");
  std::vector<std::size_t> aligned(a.topics.size());
  for (std::size_t t = 0; t < a.topics.size(); ++t) {
    auto it = index_b.find(a.topics[t]);
    if (it == index_b.end())
      throw std::invalid_argument("compare: topic " + a.topics[t] + " missing from second report");
    aligned[t] = it->second;
  }

  std::vector<compare_row> rows;
  log << "measure\tmean(A)\tmean(B)\tt\tp\tsig\n";
  for (std::size_t m = 0; m < a.measures.size(); ++m) {
    std::vector<double> va(a.topics.size()), vb(a.topics.size());
    for (std::size_t t = 0; t < a.topics.size(); ++t) {
      va[t] = a.values[t][m];
      vb[t] = b.values[aligned[t]][m];
    }
    compare_row row;
    row.measure = a.measures[m];
    row.test = paired_t_test(vb, va);  // positive direction: B above A
    row.mean_a = row.test.mean_b;
    row.mean_b = row.test.mean_a;
    row.marker = !row.test.significant ? "—" : (row.test.direction > 0 ? "↑" : "↓");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.4f\t%.6g\t%s", row.measure.c_str(),
                  row.mean_a, row.mean_b, row.test.t, row.test.p, row.marker.c_str());
    log << buf << '\n';
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Rewrites a LETOR file with labels resampled once from Binomial(n, label)/n.
inline void cmd_sample_labels(const std::string& input, const std::string& output, int n,
                              std::uint64_t seed, const parse_options& options = {}) {
  auto groups = parse_letor(input, options);
  auto sampled = resample_dataset(groups, n, seed, 0);
  write_letor(sampled, output, /*fractional_labels=*/true);
}

/// Rewrites a LETOR file with labels aggregated from a judgment-distribution
/// sidecar via the fixed 3-grade weighting; documents without a distribution
/// keep their label.
inline void cmd_aggregate_dists(const std::string& input, const std::string& dists_path,
                                const std::string& output, const parse_options& options = {}) {
  auto groups = parse_letor(input, options);
  auto dists = parse_distributions(dists_path);
  for (auto& group : groups) {
    for (std::size_t i = 0; i < group.docs.size(); ++i) {
      auto it = dists.find(dist_key{group.qid, i});
      if (it != dists.end()) group.docs[i].label = aggregate_mlia(it->second);
    }
  }
  write_letor(groups, output, /*fractional_labels=*/true);
}

}  // namespace distrank
