#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "distrank/kernels.hpp"
#include "distrank/letor.hpp"
#include "distrank/sampling.hpp"

namespace distrank {

/// Which score representation a loss consumes. The model head adapts:
/// sigmoid-bounded scalars for the probabilistic losses, raw scalars for the
/// rank-approximation losses, one softmax row per document otherwise.
enum class score_space { sigmoid, raw, softmax };

/// Model outputs and targets for one ranked list.
struct scored_list {
  std::vector<double> scores;                     // scalar score per document
  std::vector<std::vector<double>> class_probs;   // k probabilities per document
  std::vector<double> labels;                     // normalized relevance in [0,1]
  std::vector<const grade_distribution*> dists;   // judgment distributions, may be empty

  std::size_t size() const { return labels.size(); }
};

struct loss_value {
  double value = 0.0;
  std::vector<double> score_grad;
  std::vector<std::vector<double>> class_prob_grad;
};

/// Per-document weights that balance the relevant and not-relevant classes
/// within a list: w_i = N / (2 * |class(i)|), or all ones when only one class
/// is present.
inline std::vector<double> class_weights(const std::vector<double>& labels,
                                         double rel_threshold) {
  const std::size_t n = labels.size();
  std::size_t relevant = 0;
  for (double y : labels)
    if (y >= rel_threshold) ++relevant;
  const std::size_t not_relevant = n - relevant;
  std::vector<double> w(n, 1.0);
  if (relevant == 0 || not_relevant == 0) return w;
  const double wr = static_cast<double>(n) / (2.0 * static_cast<double>(relevant));
  const double wn = static_cast<double>(n) / (2.0 * static_cast<double>(not_relevant));
  for (std::size_t i = 0; i < n; ++i) w[i] = labels[i] >= rel_threshold ? wr : wn;
  return w;
}

namespace detail {

inline void check_scalar_scores(const scored_list& list, const char* name) {
  if (list.scores.size() != list.labels.size())
    throw std::invalid_argument(std::string(name) + ": scores/labels length mismatch");
}

/// Ordered index pairs (i, j) with label_i > label_j.
inline std::vector<std::pair<std::size_t, std::size_t>> label_pairs(
    const std::vector<double>& labels) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[i] > labels[j]) pairs.emplace_back(i, j);
  return pairs;
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Sum over documents of the symmetrized Binomial KL between the label and
/// score distributions, class-weighted.
inline loss_value pointwise_kl_binomial(const scored_list& list, const loss_config& cfg,
                                        const std::vector<double>* weights = nullptr) {
  detail::check_scalar_scores(list, "pointwise_kl_binomial");
  const auto w = weights ? *weights : class_weights(list.labels, cfg.rel_threshold);
  loss_value out;
  out.score_grad.assign(list.size(), 0.0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const double p = clamp_prob(list.labels[i], cfg.eps);
    const double s = list.scores[i];
    const double ph = clamp_prob(s, cfg.eps);
    const auto fwd = kl_binomial(p, ph, cfg.n);
    const auto rev = kl_binomial(ph, p, cfg.n);
    out.value += (fwd.value + rev.value) * w[i];
    if (s > cfg.eps && s < 1.0 - cfg.eps)  // clamp is flat outside
      out.score_grad[i] = (fwd.d_p_hat + rev.d_p) * w[i];
  }
  return out;
}

/// Symmetrized Multinomial KL between each document's judgment distribution
/// and the model's softmax row, class-weighted by the aggregated label.
inline loss_value pointwise_kl_multinomial(const scored_list& list, const loss_config& cfg,
                                           const std::vector<double>* weights = nullptr) {
  if (list.class_probs.size() != list.size())
    throw std::invalid_argument("pointwise_kl_multinomial: need one probability row per document");
  if (list.dists.size() != list.size())
    throw std::invalid_argument("pointwise_kl_multinomial: every document needs a grade distribution");
  for (const auto* d : list.dists)
    if (d == nullptr)
      throw std::invalid_argument("pointwise_kl_multinomial: missing grade distribution");

  std::vector<double> w;
  if (weights) {
    w = *weights;
  } else {
    // Class membership comes from the aggregated judgment distribution when
    // the 3-grade aggregation rule applies, else from the stored labels.
    std::vector<double> agg(list.size());
    for (std::size_t i = 0; i < list.size(); ++i)
      agg[i] = list.dists[i]->num_grades() == 3 ? aggregate_mlia(*list.dists[i])
                                                : list.labels[i];
    w = class_weights(agg, cfg.rel_threshold);
  }
  loss_value out;
  out.class_prob_grad.resize(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::vector<double> p = clamp_simplex(list.dists[i]->probs, cfg.eps);
    const std::vector<double> ph = clamp_simplex(list.class_probs[i], cfg.eps);
    if (p.size() != ph.size())
      throw std::invalid_argument("pointwise_kl_multinomial: grade count mismatch");
    const auto fwd = kl_multinomial(p, ph);
    const auto rev = kl_multinomial(ph, p);
    out.value += (fwd.value + rev.value) * w[i];
    // Chain through the clamp-and-renormalize of the raw probability row so
    // the gradient is exact for the value actually computed. The projection
    // part is a constant shift per row, which the softmax head annihilates.
    double scale_sum = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      scale_sum += std::max(list.class_probs[i][j], cfg.eps);
      dot += ph[j] * (fwd.d_p_hat[j] + rev.d_p[j]);
    }
    auto& grad = out.class_prob_grad[i];
    grad.assign(p.size(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (list.class_probs[i][j] > cfg.eps)
        grad[j] = (fwd.d_p_hat[j] + rev.d_p[j] - dot) * w[i] / scale_sum;
    }
  }
  return out;
}

namespace detail {

/// Shared shape of the two pairwise hinge-on-divergence losses: mean over
/// pairs of max(0, m - sign(s+ - s-) * D(s+, s-)).
template <typename DivergenceFn>
loss_value pairwise_divergence_loss(const scored_list& list, const loss_config& cfg,
                                    DivergenceFn&& divergence) {
  check_scalar_scores(list, "pairwise loss");
  const auto pairs = label_pairs(list.labels);
  loss_value out;
  out.score_grad.assign(list.size(), 0.0);
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [hi, lo] : pairs) {
    const double sp = list.scores[hi], sm = list.scores[lo];
    const auto d = divergence(sp, sm);  // kernel_value on (s+, s-)
    const double sgn = sign(sp - sm);
    const double term = cfg.m - sgn * d.value;
    if (term > 0.0) {
      out.value += term * inv;
      out.score_grad[hi] += -sgn * d.d_p * inv;
      out.score_grad[lo] += -sgn * d.d_p_hat * inv;
    }
  }
  return out;
}

}  // namespace detail

/// Pairwise hinge on the symmetrized Binomial KL between score distributions.
inline loss_value pairwise_kl_binomial(const scored_list& list, const loss_config& cfg) {
  return detail::pairwise_divergence_loss(list, cfg, [&cfg](double sp, double sm) {
    const double a = clamp_prob(sp, cfg.eps);
    const double b = clamp_prob(sm, cfg.eps);
    const auto fwd = kl_binomial(a, b, cfg.n);
    const auto rev = kl_binomial(b, a, cfg.n);
    kernel_value sym;
    sym.value = fwd.value + rev.value;
    sym.d_p = sp > cfg.eps && sp < 1.0 - cfg.eps ? fwd.d_p + rev.d_p_hat : 0.0;
    sym.d_p_hat = sm > cfg.eps && sm < 1.0 - cfg.eps ? fwd.d_p_hat + rev.d_p : 0.0;
    return sym;
  });
}

/// Pairwise hinge on the equal-variance Gaussian KL between scores.
inline loss_value pairwise_kl_gaussian(const scored_list& list, const loss_config& cfg) {
  return detail::pairwise_divergence_loss(list, cfg, [&cfg](double sp, double sm) {
    return kl_gaussian(sp, sm, cfg.sigma);
  });
}

/// Listwise divergence: the scores and labels of one list as two multivariate
/// Gaussians with shared diagonal covariance, components class-weighted.
inline loss_value listwise_kl_gaussian(const scored_list& list, const loss_config& cfg,
                                       const std::vector<double>* weights = nullptr) {
  detail::check_scalar_scores(list, "listwise_kl_gaussian");
  const auto w = weights ? *weights : class_weights(list.labels, cfg.rel_threshold);
  const double inv = 1.0 / (cfg.sigma * cfg.sigma);
  loss_value out;
  out.score_grad.assign(list.size(), 0.0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const double d = list.scores[i] - list.labels[i];
    out.value += 0.5 * d * d * inv * w[i];
    out.score_grad[i] = d * inv * w[i];
  }
  return out;
}

inline loss_value mse_loss(const scored_list& list) {
  detail::check_scalar_scores(list, "mse_loss");
  const double inv = 1.0 / static_cast<double>(list.size());
  loss_value out;
  out.score_grad.assign(list.size(), 0.0);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const double d = list.scores[i] - list.labels[i];
    out.value += d * d * inv;
    out.score_grad[i] = 2.0 * d * inv;
  }
  return out;
}

/// Mean over label-ordered pairs of max(0, 1 - s+ + s-).
inline loss_value hinge_loss(const scored_list& list) {
  detail::check_scalar_scores(list, "hinge_loss");
  const auto pairs = detail::label_pairs(list.labels);
  loss_value out;
  out.score_grad.assign(list.size(), 0.0);
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& [hi, lo] : pairs) {
    const double term = 1.0 - list.scores[hi] + list.scores[lo];
    if (term > 0.0) {
      out.value += term * inv;
      out.score_grad[hi] -= inv;
      out.score_grad[lo] += inv;
    }
  }
  return out;
}

/// 1 - ApproxNDCG: exponential-gain DCG over sigmoid-approximated ranks,
/// normalized by the exact ideal DCG. With an rng the pairwise comparisons
/// are perturbed by zero-mean logistic noise of scale beta, one draw per
/// ordered pair per evaluation.
inline loss_value approx_ndcg_loss(const scored_list& list, const loss_config& cfg,
                                   std::mt19937_64* rng = nullptr) {
  detail::check_scalar_scores(list, "approx_ndcg_loss");
  const std::size_t n = list.size();
  loss_value out;
  out.score_grad.assign(n, 0.0);

  // Ideal DCG from the exact label ordering.
  std::vector<double> gains(n);
  for (std::size_t i = 0; i < n; ++i) gains[i] = std::exp2(list.labels[i]) - 1.0;
  std::vector<double> sorted_gains = gains;
  std::sort(sorted_gains.begin(), sorted_gains.end(), std::greater<double>());
  double ideal = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    ideal += sorted_gains[r] / std::log2(2.0 + static_cast<double>(r));
  if (ideal <= 0.0) return out;  // no relevant document: defined as zero loss

  std::vector<double> noise(n * n, 0.0);
  if (rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double u = uni(*rng);
        u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
        noise[i * n + j] = cfg.beta * std::log(u / (1.0 - u));
      }
  }

  // Approximate rank of i: 1 + sum_j sigmoid(alpha * (s_j - s_i [+ z_ij])).
  std::vector<double> ranks(n, 1.0);
  std::vector<double> sig(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double diff = list.scores[j] - list.scores[i] + noise[i * n + j];
      const double s = 1.0 / (1.0 + std::exp(-cfg.alpha * diff));
      sig[i * n + j] = s;
      ranks[i] += s;
    }
  }

  const double ln2 = std::log(2.0);
  double dcg = 0.0;
  std::vector<double> d_rank(n);  // d(dcg)/d(rank_i)
  for (std::size_t i = 0; i < n; ++i) {
    const double lg = std::log2(1.0 + ranks[i]);
    dcg += gains[i] / lg;
    d_rank[i] = -gains[i] * ln2 / ((1.0 + ranks[i]) * std::log(1.0 + ranks[i]) * std::log(1.0 + ranks[i]));
  }
  out.value = 1.0 - dcg / ideal;

  // d(rank_i)/ds_j = alpha sig (1-sig) for j != i, and the negated sum for j = i.
  for (std::size_t i = 0; i < n; ++i) {
    const double coeff = -d_rank[i] / ideal;  // d(loss)/d(rank_i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double ds = cfg.alpha * sig[i * n + j] * (1.0 - sig[i * n + j]);
      out.score_grad[j] += coeff * ds;
      out.score_grad[i] -= coeff * ds;
    }
  }
  return out;
}

/// Plackett-Luce negative log-likelihood of the label-ideal permutation
/// (labels descending, ties by original index).
inline loss_value listmle_loss(const scored_list& list) {
  detail::check_scalar_scores(list, "listmle_loss");
  const std::size_t n = list.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&list](std::size_t a, std::size_t b) {
    return list.labels[a] > list.labels[b];
  });

  loss_value out;
  out.score_grad.assign(n, 0.0);
  double max_s = -std::numeric_limits<double>::infinity();
  for (double s : list.scores) max_s = std::max(max_s, s);

  // Suffix sums of exp(s - max) over the ideal ordering.
  std::vector<double> suffix(n);
  double acc = 0.0;
  for (std::size_t r = n; r-- > 0;) {
    acc += std::exp(list.scores[order[r]] - max_s);
    suffix[r] = acc;
  }
  // Position pi(r) contributes -1 once and a softmax weight to every prefix
  // term t <= r: d/ds_{pi(r)} = exp(s_{pi(r)}) * sum_{t<=r} 1/suffix(t) - 1.
  double inv_prefix = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    out.value += std::log(suffix[r]) + max_s - list.scores[order[r]];
    inv_prefix += 1.0 / suffix[r];
    out.score_grad[order[r]] = std::exp(list.scores[order[r]] - max_s) * inv_prefix - 1.0;
  }
  return out;
}

// ------------------------------ registry -----------------------------------

struct loss_spec {
  std::string name;
  score_space space = score_space::sigmoid;
  bool needs_dists = false;
  bool stochastic = false;
};

inline const std::vector<loss_spec>& loss_registry() {
  static const std::vector<loss_spec> registry = {
      {"pointwise-kl-bin", score_space::sigmoid, false, false},
      {"pointwise-kl-mul", score_space::softmax, true, false},
      {"pairwise-kl-bin", score_space::sigmoid, false, false},
      {"pairwise-kl-gauss", score_space::sigmoid, false, false},
      {"listwise-kl-gauss", score_space::sigmoid, false, false},
      {"mse", score_space::sigmoid, false, false},
      {"hinge", score_space::sigmoid, false, false},
      {"approx-ndcg", score_space::raw, false, false},
      {"approx-ndcg-st", score_space::raw, false, true},
      {"listmle", score_space::raw, false, false},
  };
  return registry;
}

inline const loss_spec& loss_by_name(const std::string& name) {
  for (const auto& spec : loss_registry())
    if (spec.name == name) return spec;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

/// Evaluates the named loss on one list. `rng` enables the stochastic
/// treatment where applicable; weights override the per-list class weights
/// (used by per-batch weighting).
inline loss_value evaluate_loss(const std::string& name, const scored_list& list,
                                const loss_config& cfg, std::mt19937_64* rng = nullptr,
                                const std::vector<double>* weights = nullptr) {
  if (name == "pointwise-kl-bin") return pointwise_kl_binomial(list, cfg, weights);
  if (name == "pointwise-kl-mul") return pointwise_kl_multinomial(list, cfg, weights);
  if (name == "pairwise-kl-bin") return pairwise_kl_binomial(list, cfg);
  if (name == "pairwise-kl-gauss") return pairwise_kl_gaussian(list, cfg);
  if (name == "listwise-kl-gauss") return listwise_kl_gaussian(list, cfg, weights);
  if (name == "mse") return mse_loss(list);
  if (name == "hinge") return hinge_loss(list);
  if (name == "approx-ndcg") return approx_ndcg_loss(list, cfg, nullptr);
  if (name == "approx-ndcg-st") return approx_ndcg_loss(list, cfg, rng);
  if (name == "listmle") return listmle_loss(list);
  throw std::invalid_argument("unknown loss '" + name + "'");
}

}  // namespace distrank
