#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace distrank {

/// Error raised by any of the text-format readers; carries the line number.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// Per-document distribution of judgments over k relevance grades.
struct grade_distribution {
  std::vector<long> counts;
  std::vector<double> probs;

  static grade_distribution from_counts(std::vector<long> counts) {
    long total = 0;
    for (long c : counts) {
      if (c < 0) throw std::invalid_argument("grade_distribution: negative count");
      total += c;
    }
    if (counts.size() < 2) throw std::invalid_argument("grade_distribution: need k >= 2");
    if (total < 1) throw std::invalid_argument("grade_distribution: all counts zero");
    grade_distribution d;
    d.probs.resize(counts.size());
    for (std::size_t g = 0; g < counts.size(); ++g)
      d.probs[g] = static_cast<double>(counts[g]) / static_cast<double>(total);
    d.counts = std::move(counts);
    return d;
  }

  std::size_t num_grades() const { return counts.size(); }
};

struct document {
  std::vector<double> features;
  double label = 0.0;     // normalized relevance in [0,1]
  int raw_label = 0;      // integer grade as read
  std::optional<grade_distribution> dist;
};

struct query_group {
  std::string qid;
  std::vector<document> docs;

  std::size_t size() const { return docs.size(); }
};

/// Normalizes an integer grade to [0,1]: grade / (k-1).
inline double normalize_label(int raw_label, int num_grades) {
  if (num_grades < 2) throw std::invalid_argument("normalize_label: need k >= 2");
  if (raw_label < 0 || raw_label >= num_grades)
    throw std::invalid_argument("normalize_label: grade out of range");
  return static_cast<double>(raw_label) / static_cast<double>(num_grades - 1);
}

/// Signed log transform for unnormalized feature values: log(1+|x|)*sign(x).
inline double log_sign_normalize(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("log_sign_normalize: non-finite input");
  const double v = std::log1p(std::fabs(x));
  return x < 0.0 ? -v : (x > 0.0 ? v : 0.0);
}

struct parse_options {
  int num_grades = 0;            // 0: infer from the max integer label seen
  bool labels_prenormalized = false;  // labels already real-valued in [0,1]
  bool log_sign_features = false;     // apply log_sign_normalize to features
  std::size_t list_cap = 0;           // keep only the first N docs per query (0: all)
  std::size_t feature_dim = 0;        // pad to at least this many features (0: inferred)
};

namespace detail {

inline bool is_integral_value(double v) { return v == std::floor(v); }

inline double parse_double(const std::string& tok, const char* what,
                           const std::string& file, std::size_t line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw parse_error(file, line, std::string("bad ") + what + " '" + tok + "'");
  }
  if (pos != tok.size()) throw parse_error(file, line, std::string("bad ") + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

/// Parses an SVMLight-style ranking file: `<label> qid:<id> <i>:<v> ... # comment`.
/// Documents are grouped by qid (groups ordered by first appearance, documents
/// in file order); 1-based sparse feature indices become dense 0-based slots
/// with absent indices filled with zero.
inline std::vector<query_group> parse_letor(const std::string& path,
                                            const parse_options& options = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  struct raw_doc {
    double label;
    std::size_t group;
    std::vector<std::pair<std::size_t, double>> feats;  // 0-based index, value
  };
  std::vector<raw_doc> rows;
  std::vector<std::string> group_qids;
  std::unordered_map<std::string, std::size_t> group_of;
  std::size_t max_index = 0;
  double max_label = 0.0;
  bool all_integral = true;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    raw_doc doc;
    doc.label = detail::parse_double(tok, "label", path, lineno);
    if (doc.label < 0.0) throw parse_error(path, lineno, "negative label");
    if (!std::isfinite(doc.label)) throw parse_error(path, lineno, "non-finite label");
    all_integral = all_integral && detail::is_integral_value(doc.label);
    max_label = std::max(max_label, doc.label);

    if (!(ls >> tok) || tok.rfind("qid:", 0) != 0 || tok.size() == 4)
      throw parse_error(path, lineno, "expected qid:<id>");
    const std::string qid = tok.substr(4);
    auto [it, inserted] = group_of.try_emplace(qid, group_qids.size());
    if (inserted) group_qids.push_back(qid);
    doc.group = it->second;

    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw parse_error(path, lineno, "expected <index>:<value>, got '" + tok + "'");
      long idx = 0;
      try {
        std::size_t pos = 0;
        idx = std::stol(tok.substr(0, colon), &pos);
        if (pos != colon) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw parse_error(path, lineno, "bad feature index in '" + tok + "'");
      }
      if (idx < 1) throw parse_error(path, lineno, "feature indices are 1-based");
      const double v = detail::parse_double(tok.substr(colon + 1), "feature value", path, lineno);
      doc.feats.emplace_back(static_cast<std::size_t>(idx - 1), v);
      max_index = std::max(max_index, static_cast<std::size_t>(idx));
    }
    rows.push_back(std::move(doc));
  }

  if (!options.labels_prenormalized && !all_integral)
    throw std::runtime_error(path + ": fractional labels need labels_prenormalized");
  int k = options.num_grades;
  if (k == 0 && !options.labels_prenormalized)
    k = std::max(2, static_cast<int>(std::llround(max_label)) + 1);

  const std::size_t dim = std::max(options.feature_dim, max_index);
  std::vector<query_group> groups(group_qids.size());
  for (std::size_t g = 0; g < group_qids.size(); ++g) groups[g].qid = group_qids[g];

  for (auto& row : rows) {
    auto& group = groups[row.group];
    if (options.list_cap > 0 && group.docs.size() >= options.list_cap) continue;
    document doc;
    doc.features.assign(dim, 0.0);
    for (auto& [idx, v] : row.feats)
      doc.features[idx] = options.log_sign_features ? log_sign_normalize(v) : v;
    if (options.labels_prenormalized) {
      if (row.label > 1.0) throw std::runtime_error(path + ": prenormalized label > 1");
      doc.label = row.label;
      doc.raw_label = k >= 2 ? static_cast<int>(std::llround(row.label * (k - 1))) : 0;
    } else {
      doc.raw_label = static_cast<int>(std::llround(row.label));
      doc.label = normalize_label(doc.raw_label, k);
    }
    group.docs.push_back(std::move(doc));
  }
  return groups;
}

/// Writes groups back out in the same LETOR line format. Labels are written
/// as integers for graded data and with full precision otherwise, so a
/// parse -> write -> parse trip reproduces labels and features exactly.
inline void write_letor(const std::vector<query_group>& groups, const std::string& path,
                        bool fractional_labels = false) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[64];
  for (const auto& group : groups) {
    for (const auto& doc : group.docs) {
      if (fractional_labels) {
        std::snprintf(buf, sizeof(buf), "%.17g", doc.label);
        out << buf;
      } else {
        out << doc.raw_label;
      }
      out << " qid:" << group.qid;
      for (std::size_t j = 0; j < doc.features.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", doc.features[j]);
        out << ' ' << (j + 1) << ':' << buf;
      }
      out << '\n';
    }
  }
}

/// Key for the judgment-distribution sidecar: query id plus the document's
/// ordinal position within that query's group.
using dist_key = std::pair<std::string, std::size_t>;

/// Parses the sidecar format `qid:<id> doc:<ordinal> counts:<c0,c1,...>`.
inline std::map<dist_key, grade_distribution> parse_distributions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<dist_key, grade_distribution> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t k_seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string qid_tok, doc_tok, counts_tok;
    if (!(ls >> qid_tok)) continue;
    if (!(ls >> doc_tok >> counts_tok) || qid_tok.rfind("qid:", 0) != 0 ||
        doc_tok.rfind("doc:", 0) != 0 || counts_tok.rfind("counts:", 0) != 0)
      throw parse_error(path, lineno, "expected qid:<id> doc:<ordinal> counts:<c0,...>");

    const std::string qid = qid_tok.substr(4);
    std::size_t ordinal = 0;
    try {
      ordinal = std::stoul(doc_tok.substr(4));
    } catch (const std::exception&) {
      throw parse_error(path, lineno, "bad doc ordinal");
    }

    std::vector<long> counts;
    std::stringstream cs(counts_tok.substr(7));
    std::string item;
    while (std::getline(cs, item, ',')) {
      try {
        counts.push_back(std::stol(item));
      } catch (const std::exception&) {
        throw parse_error(path, lineno, "bad count '" + item + "'");
      }
    }
    if (k_seen == 0) {
      k_seen = counts.size();
    } else if (counts.size() != k_seen) {
      throw parse_error(path, lineno, "grade count differs from earlier lines");
    }
    grade_distribution dist;
    try {
      dist = grade_distribution::from_counts(std::move(counts));
    } catch (const std::exception& e) {
      throw parse_error(path, lineno, e.what());
    }
    out.insert_or_assign(dist_key{qid, ordinal}, std::move(dist));
  }
  return out;
}

/// Attaches sidecar distributions to the matching documents in-place.
inline void attach_distributions(std::vector<query_group>& groups,
                                 const std::map<dist_key, grade_distribution>& dists,
                                 int num_grades) {
  for (auto& group : groups) {
    for (std::size_t i = 0; i < group.docs.size(); ++i) {
      auto it = dists.find(dist_key{group.qid, i});
      if (it == dists.end()) continue;
      if (static_cast<int>(it->second.num_grades()) != num_grades)
        throw std::runtime_error("distribution for qid " + group.qid +
                                 " has wrong grade count");
      group.docs[i].dist = it->second;
    }
  }
}

/// One train/validation/test partition.
struct fold {
  std::vector<query_group> train;
  std::vector<query_group> validation;
  std::vector<query_group> test;
};

struct folded_dataset {
  std::vector<fold> folds;
  int num_grades = 2;
  std::size_t feature_dim = 0;
};

/// Loads `Fold<i>/{train,vali,test}.txt` under root for the requested folds.
/// All splits are padded to one shared feature dimension.
inline folded_dataset load_folds(const std::string& root, const std::vector<int>& fold_ids,
                                 parse_options options = {},
                                 const std::string& dists_path = "") {
  namespace fs = std::filesystem;
  folded_dataset ds;
  std::map<dist_key, grade_distribution> dists;
  if (!dists_path.empty()) dists = parse_distributions(dists_path);

  // Two passes: first find the global feature dimension, then parse for real.
  std::size_t dim = options.feature_dim;
  const char* names[3] = {"train.txt", "vali.txt", "test.txt"};
  for (int pass = 0; pass < 2; ++pass) {
    options.feature_dim = dim;
    for (int id : fold_ids) {
      const fs::path dir = fs::path(root) / ("Fold" + std::to_string(id));
      fold f;
      for (int s = 0; s < 3; ++s) {
        auto groups = parse_letor((dir / names[s]).string(), options);
        for (const auto& g : groups)
          for (const auto& d : g.docs) dim = std::max(dim, d.features.size());
        if (pass == 1) {
          if (!dists.empty()) {
            int k = options.num_grades;
            if (k == 0 && !dists.empty()) k = static_cast<int>(dists.begin()->second.num_grades());
            attach_distributions(groups, dists, k);
          }
          (s == 0 ? f.train : s == 1 ? f.validation : f.test) = std::move(groups);
        }
      }
      if (pass == 1) ds.folds.push_back(std::move(f));
    }
  }
  ds.feature_dim = dim;

  int k = options.num_grades;
  if (k == 0) {
    for (const auto& f : ds.folds)
      for (const auto* split : {&f.train, &f.validation, &f.test})
        for (const auto& g : *split)
          for (const auto& d : g.docs) k = std::max(k, d.raw_label + 1);
    k = std::max(k, 2);
    // Re-derive normalized labels now that k is known across every split.
    if (!options.labels_prenormalized)
      for (auto& f : ds.folds)
        for (auto* split : {&f.train, &f.validation, &f.test})
          for (auto& g : *split)
            for (auto& d : g.docs) d.label = normalize_label(d.raw_label, k);
  }
  ds.num_grades = k;
  return ds;
}

}  // namespace distrank
