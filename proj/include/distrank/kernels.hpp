#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace distrank {

/// Hyperparameters shared by the probabilistic losses.
struct loss_config {
  int n = 32;                  // Binomial / Multinomial trial count
  double m = 1.0;              // pairwise slack
  double sigma = 0.5;          // Gaussian std
  double alpha = 10.0;         // rank-approximation sigmoid steepness
  double beta = 1.0;           // logistic noise scale for the stochastic variant
  double rel_threshold = 0.1;  // relevant / not-relevant split
  double eps = 1e-7;           // probability clamp
  bool weights_per_batch = false;  // class weights over the whole batch

  void validate() const {
    if (n < 1) throw std::invalid_argument("loss_config: n must be >= 1");
    if (m < 0.0) throw std::invalid_argument("loss_config: m must be >= 0");
    if (sigma <= 0.0) throw std::invalid_argument("loss_config: sigma must be > 0");
    if (alpha <= 0.0) throw std::invalid_argument("loss_config: alpha must be > 0");
    if (beta <= 0.0) throw std::invalid_argument("loss_config: beta must be > 0");
    if (rel_threshold <= 0.0 || rel_threshold >= 1.0)
      throw std::invalid_argument("loss_config: rel_threshold must be in (0,1)");
    if (eps <= 0.0) throw std::invalid_argument("loss_config: eps must be > 0");
  }
};

inline double clamp_prob(double p, double eps) {
  return p < eps ? eps : (p > 1.0 - eps ? 1.0 - eps : p);
}

/// Clamps a probability vector elementwise to >= eps, then renormalizes.
inline std::vector<double> clamp_simplex(const std::vector<double>& p, double eps) {
  std::vector<double> out(p.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] < eps ? eps : p[i];
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Divergence value with partial derivatives for both arguments.
struct kernel_value {
  double value = 0.0;
  double d_p = 0.0;
  double d_p_hat = 0.0;
};

/// KL divergence between Bin(n,p) and Bin(n,p_hat). Callers clamp the
/// probabilities into the open interval first; exact 0/1 is rejected.
inline kernel_value kl_binomial(double p, double p_hat, int n) {
  if (!(p > 0.0 && p < 1.0) || !(p_hat > 0.0 && p_hat < 1.0))
    throw std::invalid_argument("kl_binomial: probabilities must lie in (0,1)");
  if (n < 1) throw std::invalid_argument("kl_binomial: n must be >= 1");
  const double dn = static_cast<double>(n);
  kernel_value out;
  out.value = dn * (p * std::log(p / p_hat) + (1.0 - p) * std::log((1.0 - p) / (1.0 - p_hat)));
  out.d_p = dn * std::log(p * (1.0 - p_hat) / (p_hat * (1.0 - p)));
  out.d_p_hat = dn * (p_hat - p) / (p_hat * (1.0 - p_hat));
  return out;
}

/// KL divergence between two categorical/Multinomial event distributions,
/// sum_j p_j log(p_j / p_hat_j), with per-coordinate partials.
struct mvn_kernel_value {
  double value = 0.0;
  std::vector<double> d_p;
  std::vector<double> d_p_hat;
};

inline mvn_kernel_value kl_multinomial(const std::vector<double>& p,
                                       const std::vector<double>& p_hat) {
  if (p.size() != p_hat.size())
    throw std::invalid_argument("kl_multinomial: length mismatch");
  mvn_kernel_value out;
  out.d_p.resize(p.size());
  out.d_p_hat.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0 || p_hat[j] <= 0.0)
      throw std::invalid_argument("kl_multinomial: probabilities must be positive");
    const double ratio = std::log(p[j] / p_hat[j]);
    out.value += p[j] * ratio;
    out.d_p[j] = ratio + 1.0;
    out.d_p_hat[j] = -p[j] / p_hat[j];
  }
  return out;
}

/// Equal-variance Gaussian KL: (mu1-mu2)^2 / (2 sigma^2). Symmetric.
inline kernel_value kl_gaussian(double mu1, double mu2, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("kl_gaussian: sigma must be > 0");
  const double d = mu1 - mu2;
  const double inv = 1.0 / (sigma * sigma);
  kernel_value out;
  out.value = 0.5 * d * d * inv;
  out.d_p = d * inv;       // d/dmu1
  out.d_p_hat = -d * inv;  // d/dmu2
  return out;
}

/// Multivariate Gaussian KL with shared diagonal covariance sigma^2 I:
/// sum_i (mu1_i - mu2_i)^2 / (2 sigma^2). Gradients returned wrt mu1.
inline mvn_kernel_value kl_mvn_diag(const std::vector<double>& mu1,
                                    const std::vector<double>& mu2, double sigma) {
  if (mu1.size() != mu2.size()) throw std::invalid_argument("kl_mvn_diag: length mismatch");
  if (sigma <= 0.0) throw std::invalid_argument("kl_mvn_diag: sigma must be > 0");
  const double inv = 1.0 / (sigma * sigma);
  mvn_kernel_value out;
  out.d_p.resize(mu1.size());
  out.d_p_hat.resize(mu1.size());
  for (std::size_t i = 0; i < mu1.size(); ++i) {
    const double d = mu1[i] - mu2[i];
    out.value += 0.5 * d * d * inv;
    out.d_p[i] = d * inv;
    out.d_p_hat[i] = -d * inv;
  }
  return out;
}

}  // namespace distrank
