#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace inrd::stats {

double mean(std::span<const double> x);
/// Unbiased (n−1) variance.
double variance(std::span<const double> x);
double median(std::span<const double> x);

/// Ranks starting at 1; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> x);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  /// H1: mean(a) > mean(b).
  double p_greater = 1.0;
};
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct SpearmanResult {
  double rho = 0.0;
  /// Student-t approximation, two-sided.
  double p_two_sided = 1.0;
  /// Exact permutation p-values; set when n ≤ kExactSpearmanMax.
  bool exact = false;
  double p_exact_two_sided = 1.0;
  /// H1: rho < 0.
  double p_exact_less = 1.0;
};
inline constexpr std::size_t kExactSpearmanMax = 10;
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};
/// Two-sample Kolmogorov–Smirnov with the asymptotic distribution (Stephens' small-sample
/// correction).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);
/// Kolmogorov survival function Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
double kolmogorov_q(double lambda);

/// Central acceptance interval [lo, hi] on the count of successes of Binomial(n, p):
/// P(X < lo) ≤ (1−level)/2 and P(X > hi) ≤ (1−level)/2.
struct CountInterval {
  std::size_t lo = 0;
  std::size_t hi = 0;
};
CountInterval binomial_acceptance(std::size_t n, double p, double level = 0.95);

}  // namespace inrd::stats
