#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "distrank/metrics.hpp"

using namespace distrank;

namespace {

// Brute-force normalizer: the best DCG over every permutation of the list.
double best_dcg_by_enumeration(std::vector<int> grades, std::size_t k, gain_kind gain) {
  std::vector<std::size_t> perm(grades.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end());
  double best = 0.0;
  do {
    best = std::max(best, dcg(perm, grades, k, gain));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Direct-definition oracle for average precision.
double ap_oracle(const std::vector<double>& scores, const std::vector<double>& labels,
                 double threshold) {
  const auto perm = rank_permutation(scores);
  double hits = 0.0, total = 0.0, count = 0.0;
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    if (labels[perm[pos]] >= threshold) {
      hits += 1.0;
      total += hits / (pos + 1.0);
      count += 1.0;
    }
  }
  return count > 0.0 ? total / count : 0.0;
}

query_group group_from(const std::vector<int>& grades) {
  query_group g;
  g.qid = "t";
  for (int grade : grades) {
    document d;
    d.features = {0.0};
    d.raw_label = grade;
    d.label = grade / 2.0;
    g.docs.push_back(d);
  }
  return g;
}

}  // namespace

TEST_CASE("dcg examples") {
  CHECK(dcg({0}, {3}, 1) == Catch::Approx(7.0));
  CHECK(dcg({0, 1, 2}, {0, 0, 0}, 3) == 0.0);
  // ranking [0,2,1] of grades {2,1,0}: grades by rank are 0,2,1
  CHECK(dcg({0, 2, 1}, {0, 1, 2}, 3) == Catch::Approx(2.3927892607143724).epsilon(1e-12));
  // linear gain variant
  CHECK(dcg({0}, {3}, 1, gain_kind::linear) == Catch::Approx(3.0));
}

TEST_CASE("ndcg examples and edge cases") {
  CHECK(ndcg_at_k({3.0, 2.0, 1.0}, {2, 1, 0}, 3) == Catch::Approx(1.0));
  CHECK(ndcg_at_k({0.9, 0.1, 0.5}, {0, 1, 2}, 3) ==
        Catch::Approx(2.3927892607143724 / 3.6309297535714578).epsilon(1e-12));
  // all labels equal and positive: every permutation is ideal
  CHECK(ndcg_at_k({0.4, 0.9, 0.1}, {1, 1, 1}, 3) == Catch::Approx(1.0));
  // no relevant documents: defined as zero
  CHECK(ndcg_at_k({0.4, 0.9}, {0, 0}, 2) == 0.0);
}

TEST_CASE("ndcg agrees with the brute-force best permutation") {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> grade(0, 2);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<int> grades(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      grades[i] = grade(rng);
      scores[i] = score(rng);
    }
    for (std::size_t k : {1u, 3u, 6u}) {
      const double best = best_dcg_by_enumeration(grades, k, gain_kind::exponential);
      const double mine = dcg(rank_permutation(scores), grades, k);
      const double expected = best > 0.0 ? mine / best : 0.0;
      CHECK(std::fabs(ndcg_at_k(scores, grades, k) - expected) < 1e-12);
    }
  }
}

TEST_CASE("precision at k") {
  CHECK(precision_at_k({0.9}, {1.0}, 1, 0.1) == 1.0);
  CHECK(precision_at_k({0.9, 0.5}, {0.0, 0.0}, 2, 0.1) == 0.0);
  CHECK(precision_at_k({0.9, 0.8, 0.7}, {1.0, 0.0, 0.5}, 3, 0.1) == Catch::Approx(2.0 / 3.0));
  // lists shorter than k keep k in the denominator
  CHECK(precision_at_k({0.9}, {1.0}, 5, 0.1) == Catch::Approx(0.2));
}

TEST_CASE("average precision") {
  CHECK(average_precision({0.9}, {1.0}, 0.1) == 1.0);
  CHECK(average_precision({0.9, 0.8, 0.7}, {1.0, 0.0, 1.0}, 0.1) ==
        Catch::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision({0.9, 0.8}, {0.0, 0.0}, 0.1) == 0.0);
}

TEST_CASE("err cascade") {
  CHECK(err({0.5}, {0}, 2) == 0.0);
  CHECK(err({0.5}, {2}, 2) == Catch::Approx(1.0 - std::exp2(-2.0)));
  // a top document with the max grade absorbs almost everything; a grade-0
  // second document adds nothing
  CHECK(err({0.9, 0.1}, {2, 0}, 2) == Catch::Approx(err({0.5}, {2}, 2)));
}

TEST_CASE("err is monotone when one grade increases") {
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> grade(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<int> grades(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      grades[i] = grade(rng);
      scores[i] = (rng() % 1000) / 1000.0;
    }
    const double before = err(scores, grades, 2);
    auto bumped = grades;
    bumped[rng() % n] += 1;
    CHECK(err(scores, bumped, 2) >= before - 1e-12);
  }
}

TEST_CASE("measures are argsort-invariant and bounded") {
  std::mt19937_64 rng(63);
  std::uniform_int_distribution<int> grade(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<int> grades(n);
    std::vector<double> scores(n), labels(n), warped(n);
    for (std::size_t i = 0; i < n; ++i) {
      grades[i] = grade(rng);
      labels[i] = grades[i] / 2.0;
      scores[i] = (rng() % 10000) / 10000.0;
      warped[i] = std::exp(3.0 * scores[i]) + 2.0;  // strictly monotone map
    }
    for (std::size_t k : {1u, 3u, 5u}) {
      const double v = ndcg_at_k(scores, grades, k);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
      CHECK(v == ndcg_at_k(warped, grades, k));
      const double p = precision_at_k(scores, labels, k, 0.1);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    CHECK(average_precision(scores, labels, 0.1) == average_precision(warped, labels, 0.1));
    const double e = err(scores, grades, 2);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("ties rank by original index and evaluation repeats identically") {
  const std::vector<double> scores = {0.5, 0.5, 0.5};
  const auto perm = rank_permutation(scores);
  CHECK(perm == std::vector<std::size_t>{0, 1, 2});
  const std::vector<int> grades = {0, 2, 1};
  CHECK(ndcg_at_k(scores, grades, 3) == ndcg_at_k(scores, grades, 3));
}

TEST_CASE("average precision matches the direct-definition oracle") {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<double> scores(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = (rng() % 1000) / 1000.0;
      labels[i] = (rng() % 3) / 2.0;
    }
    CHECK(average_precision(scores, labels, 0.1) ==
          Catch::Approx(ap_oracle(scores, labels, 0.1)).margin(1e-14));
  }
}

TEST_CASE("evaluate_run reports per topic plus means") {
  const auto ideal = group_from({2, 1, 0});
  const auto inverted = group_from({0, 1, 2});
  const std::vector<std::vector<double>> scores = {{0.9, 0.5, 0.1}, {0.9, 0.5, 0.1}};
  const auto report = evaluate_run({ideal, inverted}, scores);
  REQUIRE(report.topics.size() == 2);
  REQUIRE(report.measures.size() == 8);  // ERR, P@{1,3,5}, nDCG@{1,3,5}, AP
  const auto ndcg1 = std::find(report.measures.begin(), report.measures.end(), "nDCG@1") -
                     report.measures.begin();
  CHECK(report.values[0][ndcg1] == Catch::Approx(1.0));
  CHECK(report.values[1][ndcg1] == Catch::Approx(0.0));
  CHECK(report.means[ndcg1] == Catch::Approx(0.5));

  const auto single = evaluate_run({ideal}, {{0.9, 0.5, 0.1}});
  CHECK(single.means == single.values[0]);

  CHECK_THROWS(evaluate_run({}, {}));
  CHECK_THROWS(evaluate_run({ideal}, {{0.9, 0.5}}));
}

TEST_CASE("report tsv round-trips") {
  const auto report = evaluate_run({group_from({2, 0}), group_from({1, 1})},
                                   {{0.8, 0.1}, {0.3, 0.6}});
  const auto path = std::filesystem::temp_directory_path() / "distrank_report.tsv";
  write_report_tsv(report, path.string());
  const auto loaded = read_report_tsv(path.string());
  CHECK(loaded.measures == report.measures);
  CHECK(loaded.topics == report.topics);
  REQUIRE(loaded.values.size() == report.values.size());
  for (std::size_t t = 0; t < report.values.size(); ++t)
    for (std::size_t m = 0; m < report.measures.size(); ++m)
      CHECK(loaded.values[t][m] == Catch::Approx(report.values[t][m]).margin(1e-6));
}
