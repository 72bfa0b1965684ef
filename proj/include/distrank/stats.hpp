#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace distrank {

namespace detail {

/// Continued-fraction core of the regularized incomplete beta function
/// (modified Lentz), converged to absolute 1e-10.
inline double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 500;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kTol) return h;
  }
  throw std::runtime_error("beta_cf: did not converge");
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// Two-sided p of a t statistic with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
  if (df < 1.0) throw std::invalid_argument("t_two_sided_p: df must be >= 1");
  return detail::incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct t_test_result {
  double t = 0.0;
  double p = 1.0;
  int direction = 0;       // sign of mean(a - b)
  bool significant = false;  // p < alpha
  double mean_a = 0.0;
  double mean_b = 0.0;
};

/// Paired two-sided Student's t-test over topic-aligned values. Degenerate
/// inputs follow the documented rules: all-zero differences give t = 0,
/// p = 1; zero-variance nonzero differences give p = 0.
inline t_test_result paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                                   double alpha = 0.05) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");

  t_test_result out;
  double mean_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_a += a[i];
    out.mean_b += b[i];
    mean_d += a[i] - b[i];
  }
  out.mean_a /= static_cast<double>(n);
  out.mean_b /= static_cast<double>(n);
  mean_d /= static_cast<double>(n);

  double varsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean_d;
    varsum += d * d;
  }
  const double sd = std::sqrt(varsum / static_cast<double>(n - 1));
  out.direction = mean_d > 0.0 ? 1 : (mean_d < 0.0 ? -1 : 0);

  if (sd == 0.0) {
    if (mean_d == 0.0) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = mean_d > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
  } else {
    out.t = mean_d / (sd / std::sqrt(static_cast<double>(n)));
    out.p = t_two_sided_p(out.t, static_cast<double>(n - 1));
  }
  out.significant = out.p < alpha;
  return out;
}

}  // namespace distrank
