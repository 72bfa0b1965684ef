#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "distrank/letor.hpp"

namespace distrank {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Independent stream per (seed, qid, ordinal, epoch) so parallel or
/// reordered sampling stays reproducible.
inline std::mt19937_64 doc_stream(std::uint64_t seed, const std::string& qid,
                                  std::size_t ordinal, std::uint64_t epoch) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ hash_str(qid));
  h = splitmix64(h ^ ordinal);
  h = splitmix64(h ^ epoch);
  return std::mt19937_64(h);
}

}  // namespace detail

/// Draws Binomial(n, p)/n: the average of n simulated binary judgments.
/// Extreme labels (p = 0 or 1) are returned unchanged.
inline double sample_binomial_label(double p, int n, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_binomial_label: p outside [0,1]");
  if (n < 1) throw std::invalid_argument("sample_binomial_label: n must be >= 1");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  // Explicit Bernoulli trials: identical draws on every platform.
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int successes = 0;
  for (int t = 0; t < n; ++t)
    if (uni(rng) < p) ++successes;
  return static_cast<double>(successes) / static_cast<double>(n);
}

enum class sampling_mode { none, once, per_epoch };

inline sampling_mode sampling_mode_from_string(const std::string& s) {
  if (s == "none") return sampling_mode::none;
  if (s == "once") return sampling_mode::once;
  if (s == "per-epoch") return sampling_mode::per_epoch;
  throw std::invalid_argument("unknown sampling mode '" + s + "'");
}

/// One resampled label per document, grouped like the input. In `once` mode
/// callers pass epoch 0 every time; in `per_epoch` mode the current epoch.
inline std::vector<std::vector<double>> resample_labels(
    const std::vector<query_group>& groups, int n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::vector<double>> out(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out[g].resize(groups[g].docs.size());
    for (std::size_t i = 0; i < groups[g].docs.size(); ++i) {
      auto rng = detail::doc_stream(seed, groups[g].qid, i, epoch);
      out[g][i] = sample_binomial_label(groups[g].docs[i].label, n, rng);
    }
  }
  return out;
}

/// Copy of the groups with labels replaced by one resampling round.
inline std::vector<query_group> resample_dataset(const std::vector<query_group>& groups,
                                                 int n, std::uint64_t seed,
                                                 std::uint64_t epoch = 0) {
  auto labels = resample_labels(groups, n, seed, epoch);
  std::vector<query_group> out = groups;
  for (std::size_t g = 0; g < out.size(); ++g)
    for (std::size_t i = 0; i < out[g].docs.size(); ++i)
      out[g].docs[i].label = labels[g][i];
  return out;
}

/// Collapses a 3-grade judgment distribution to one scalar label with the
/// weighted average [-1.0, 0.5, 1.0], rescaled from [-1,1] into [0,1].
inline double aggregate_mlia(const grade_distribution& dist) {
  if (dist.num_grades() != 3)
    throw std::invalid_argument("aggregate_mlia: needs exactly 3 grades");
  static constexpr double kWeights[3] = {-1.0, 0.5, 1.0};
  double a = 0.0;
  for (std::size_t g = 0; g < 3; ++g) a += dist.probs[g] * kWeights[g];
  return (a + 1.0) / 2.0;
}

}  // namespace distrank
