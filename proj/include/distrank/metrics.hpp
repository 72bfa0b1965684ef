#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "distrank/letor.hpp"

namespace distrank {

enum class gain_kind { exponential, linear };

inline gain_kind gain_from_string(const std::string& s) {
  if (s == "exp") return gain_kind::exponential;
  if (s == "linear") return gain_kind::linear;
  throw std::invalid_argument("unknown gain '" + s + "' (expected exp|linear)");
}

/// Document ordinals sorted by descending score; equal scores keep ascending
/// original index, so evaluation is deterministic.
inline std::vector<std::size_t> rank_permutation(const std::vector<double>& scores) {
  std::vector<std::size_t> perm(scores.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return perm;
}

/// 1-based rank of each document under the permutation.
inline std::vector<std::size_t> ranks_of(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> r(perm.size());
  for (std::size_t pos = 0; pos < perm.size(); ++pos) r[perm[pos]] = pos + 1;
  return r;
}

inline double gain_of(int grade, gain_kind gain) {
  return gain == gain_kind::exponential ? std::exp2(static_cast<double>(grade)) - 1.0
                                        : static_cast<double>(grade);
}

/// DCG@k of a permutation over integer grades.
inline double dcg(const std::vector<std::size_t>& perm, const std::vector<int>& grades,
                  std::size_t k, gain_kind gain = gain_kind::exponential) {
  if (k < 1) throw std::invalid_argument("dcg: cutoff must be >= 1");
  double total = 0.0;
  const std::size_t top = std::min(k, perm.size());
  for (std::size_t pos = 0; pos < top; ++pos)
    total += gain_of(grades[perm[pos]], gain) / std::log2(2.0 + static_cast<double>(pos));
  return total;
}

/// nDCG@k from scores against integer grades; 0 when the ideal DCG is 0.
inline double ndcg_at_k(const std::vector<double>& scores, const std::vector<int>& grades,
                        std::size_t k, gain_kind gain = gain_kind::exponential) {
  if (scores.size() != grades.size()) throw std::invalid_argument("ndcg_at_k: length mismatch");
  const double actual = dcg(rank_permutation(scores), grades, k, gain);
  std::vector<std::size_t> ideal(grades.size());
  std::iota(ideal.begin(), ideal.end(), 0);
  std::stable_sort(ideal.begin(), ideal.end(),
                   [&grades](std::size_t a, std::size_t b) { return grades[a] > grades[b]; });
  const double best = dcg(ideal, grades, k, gain);
  return best > 0.0 ? actual / best : 0.0;
}

/// Fraction of the top-k documents with normalized label >= rel_threshold;
/// short lists keep k in the denominator.
inline double precision_at_k(const std::vector<double>& scores, const std::vector<double>& labels,
                             std::size_t k, double rel_threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("precision_at_k: length mismatch");
  if (k < 1) throw std::invalid_argument("precision_at_k: cutoff must be >= 1");
  const auto perm = rank_permutation(scores);
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < std::min(k, perm.size()); ++pos)
    if (labels[perm[pos]] >= rel_threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Mean over relevant documents of the precision at their rank; 0 when no
/// document is relevant.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<double>& labels, double rel_threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("average_precision: length mismatch");
  const auto perm = rank_permutation(scores);
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    if (labels[perm[pos]] >= rel_threshold) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
  }
  return hits > 0 ? sum / static_cast<double>(hits) : 0.0;
}

/// Expected reciprocal rank under the cascade model with stop probability
/// R_g = (2^g - 1) / 2^g_max.
inline double err(const std::vector<double>& scores, const std::vector<int>& grades,
                  int g_max) {
  if (scores.size() != grades.size()) throw std::invalid_argument("err: length mismatch");
  if (g_max < 1) throw std::invalid_argument("err: g_max must be >= 1");
  const auto perm = rank_permutation(scores);
  const double denom = std::exp2(static_cast<double>(g_max));
  double value = 0.0;
  double not_stopped = 1.0;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    const double r = (std::exp2(static_cast<double>(grades[perm[pos]])) - 1.0) / denom;
    value += not_stopped * r / static_cast<double>(pos + 1);
    not_stopped *= 1.0 - r;
  }
  return value;
}

// ------------------------------ reporting ----------------------------------

struct eval_options {
  std::vector<std::size_t> cutoffs = {1, 3, 5};
  gain_kind gain = gain_kind::exponential;
  double rel_threshold = 0.1;
  int g_max = 2;  // highest grade, usually num_grades - 1
};

/// Per-topic and mean values for a fixed measure set.
struct metric_report {
  std::vector<std::string> measures;
  std::vector<std::string> topics;
  std::vector<std::vector<double>> values;  // [topic][measure]
  std::vector<double> means;                // [measure]
};

inline std::vector<std::string> measure_names(const eval_options& opt) {
  std::vector<std::string> names = {"ERR"};
  for (std::size_t k : opt.cutoffs) names.push_back("P@" + std::to_string(k));
  for (std::size_t k : opt.cutoffs) names.push_back("nDCG@" + std::to_string(k));
  names.push_back("AP");
  return names;
}

/// Scores one run: per-topic ERR, P@k, nDCG@k and AP plus arithmetic means.
inline metric_report evaluate_run(const std::vector<query_group>& topics,
                                  const std::vector<std::vector<double>>& scores,
                                  const eval_options& opt = {}) {
  if (topics.empty()) throw std::invalid_argument("evaluate_run: empty split");
  if (topics.size() != scores.size())
    throw std::invalid_argument("evaluate_run: one score vector per topic required");

  metric_report report;
  report.measures = measure_names(opt);
  report.means.assign(report.measures.size(), 0.0);
  for (std::size_t t = 0; t < topics.size(); ++t) {
    const auto& group = topics[t];
    if (group.docs.size() != scores[t].size())
      throw std::invalid_argument("evaluate_run: score count mismatch for qid " + group.qid);
    std::vector<int> grades(group.docs.size());
    std::vector<double> labels(group.docs.size());
    for (std::size_t i = 0; i < group.docs.size(); ++i) {
      grades[i] = group.docs[i].raw_label;
      labels[i] = group.docs[i].label;
    }
    std::vector<double> row;
    row.push_back(err(scores[t], grades, opt.g_max));
    for (std::size_t k : opt.cutoffs)
      row.push_back(precision_at_k(scores[t], labels, k, opt.rel_threshold));
    for (std::size_t k : opt.cutoffs) row.push_back(ndcg_at_k(scores[t], grades, k, opt.gain));
    row.push_back(average_precision(scores[t], labels, opt.rel_threshold));

    report.topics.push_back(group.qid);
    for (std::size_t m = 0; m < row.size(); ++m) report.means[m] += row[m];
    report.values.push_back(std::move(row));
  }
  for (double& m : report.means) m /= static_cast<double>(report.topics.size());
  return report;
}

/// Tab-separated report: one row per topic plus a MEAN row.
inline void write_report_tsv(const metric_report& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "topic";
  for (const auto& m : report.measures) out << '\t' << m;
  out << '\n';
  char buf[32];
  auto write_row = [&](const std::string& id, const std::vector<double>& row) {
    out << id;
    for (double v : row) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      out << '\t' << buf;
    }
    out << '\n';
  };
  for (std::size_t t = 0; t < report.topics.size(); ++t)
    write_row(report.topics[t], report.values[t]);
  write_row("MEAN", report.means);
}

inline metric_report read_report_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  metric_report report;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty report");
  {
    std::istringstream hs(line);
    std::string tok;
    hs >> tok;
    if (tok != "topic") throw std::runtime_error(path + ": not a metric report");
    while (hs >> tok) report.measures.push_back(tok);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.size() != report.measures.size())
      throw parse_error(path, lineno, "wrong column count");
    if (id == "MEAN") {
      report.means = std::move(row);
    } else {
      report.topics.push_back(id);
      report.values.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace distrank
