#include "inrd/stats.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "inrd/linalg.hpp"

namespace inrd::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  CompensatedSum s;
  for (double v : x) s.add(v);
  return s.value() / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance needs at least 2 values");
  const double m = mean(x);
  CompensatedSum s;
  for (double v : x) s.add((v - m) * (v - m));
  return s.value() / static_cast<double>(x.size() - 1);
}

double median(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("median of empty sample");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: need >= 2 values per sample");
  const double va = variance(a) / static_cast<double>(a.size());
  const double vb = variance(b) / static_cast<double>(b.size());
  WelchResult r;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw std::invalid_argument("welch_t_test: both samples are constant");
  r.t = (mean(a) - mean(b)) / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.df);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  require_same_size(x.size(), y.size(), "spearman");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("spearman: need at least 3 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  SpearmanResult r;
  r.rho = pearson(rx, ry);
  const double df = static_cast<double>(n - 2);
  if (std::abs(r.rho) >= 1.0) {
    r.p_two_sided = 0.0;
  } else {
    const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
    r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
  }
  if (n <= kExactSpearmanMax) {
    constexpr double tol = 1e-12;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> permuted(n);
    std::size_t total = 0, as_low = 0, as_extreme = 0;
    do {
      for (std::size_t i = 0; i < n; ++i) permuted[i] = ry[perm[i]];
      const double rho = pearson(rx, permuted);
      ++total;
      if (rho <= r.rho + tol) ++as_low;
      if (std::abs(rho) >= std::abs(r.rho) - tol) ++as_extreme;
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.exact = true;
    r.p_exact_less = static_cast<double>(as_low) / static_cast<double>(total);
    r.p_exact_two_sided = static_cast<double>(as_extreme) / static_cast<double>(total);
  }
  return r;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // series is numerically 1 here and converges slowly
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  const double ne = std::sqrt(nx * ny / (nx + ny));
  KsResult r;
  r.d = d;
  r.p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

CountInterval binomial_acceptance(std::size_t n, double p, double level) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_acceptance: p outside [0,1]");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("binomial_acceptance: level outside (0,1)");
  const boost::math::binomial dist(static_cast<double>(n), p);
  const double tail = 0.5 * (1.0 - level);
  CountInterval ci{0, n};
  // lo: largest count with P(X < lo) ≤ tail.
  while (ci.lo < n && boost::math::cdf(dist, static_cast<double>(ci.lo)) <= tail) ++ci.lo;
  // hi: smallest count with P(X > hi) ≤ tail.
  ci.hi = ci.lo;
  while (ci.hi < n && boost::math::cdf(boost::math::complement(dist, static_cast<double>(ci.hi))) > tail) ++ci.hi;
  return ci;
}

}  // namespace inrd::stats
