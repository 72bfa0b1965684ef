#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "distrank/losses.hpp"

namespace testutil {

inline double rel_err(double got, double want, double floor = 1e-9) {
  return std::fabs(got - want) / std::max({std::fabs(got), std::fabs(want), floor});
}

/// Central finite difference of a scalar function of one coordinate.
template <typename Fn>
double central_diff(Fn&& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Random list in a given score space with mixed relevance grades.
inline distrank::scored_list random_list(std::size_t n, std::mt19937_64& rng,
                                         bool raw_scores = false, int grades = 3) {
  distrank::scored_list list;
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  std::uniform_real_distribution<double> wide(-2.0, 2.0);
  std::uniform_int_distribution<int> grade(0, grades - 1);
  for (std::size_t i = 0; i < n; ++i) {
    list.scores.push_back(raw_scores ? wide(rng) : uni(rng));
    list.labels.push_back(static_cast<double>(grade(rng)) / (grades - 1));
  }
  return list;
}

/// Finite-difference check of a loss's score gradient on one list.
template <typename LossFn>
double max_grad_rel_err(const distrank::scored_list& list, LossFn&& loss, double h = 1e-5,
                        double floor = 1e-6) {
  const auto base = loss(list);
  double worst = 0.0;
  for (std::size_t i = 0; i < list.scores.size(); ++i) {
    distrank::scored_list plus = list, minus = list;
    plus.scores[i] += h;
    minus.scores[i] -= h;
    const double fd = (loss(plus).value - loss(minus).value) / (2.0 * h);
    worst = std::max(worst, std::fabs(base.score_grad[i] - fd) /
                                std::max({std::fabs(fd), std::fabs(base.score_grad[i]), floor}));
  }
  return worst;
}

}  // namespace testutil
