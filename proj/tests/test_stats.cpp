#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "inrd/stats.hpp"

using namespace inrd;

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double binomial_pmf(std::size_t n, std::size_t k, double p) {
  const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(lg + k * std::log(p) + (n - k) * std::log1p(-p));
}

}  // namespace

TEST_CASE("moments and median") {
  const std::vector<double> x{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  CHECK(stats::mean(x) == 5.0);
  CHECK(stats::variance(x) == doctest::Approx(32.0 / 7.0).epsilon(1e-15));
  CHECK(stats::median(x) == 4.5);
  CHECK(stats::median(std::vector<double>{3.0, 1.0, 2.0}) == 2.0);
}

TEST_CASE("average ranks share ties") {
  const std::vector<double> x{10.0, 20.0, 10.0, 30.0, 20.0, 20.0};
  CHECK(stats::average_ranks(x) == std::vector<double>{1.5, 4.0, 1.5, 6.0, 4.0, 4.0});
}

TEST_CASE("Welch t-test against reference values") {
  // Reference values from an independent statistics package.
  const std::vector<double> a{1.2, 2.3, 3.1, 4.8, 5.0, 2.2}, b{0.1, 0.5, 1.1, 0.9, 2.0};
  const auto r = stats::welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(3.1215139112084196).epsilon(1e-10));
  CHECK(r.p_two_sided == doctest::Approx(0.01576341187953835).epsilon(1e-8));
  CHECK(r.p_greater == doctest::Approx(0.007881705939769175).epsilon(1e-8));
}

TEST_CASE("Spearman rho is Pearson on ranks; exact p-values by enumeration") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {5u, 7u, 8u}) {
    std::vector<double> x(n), y(n);
    std::normal_distribution<double> g(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(i);
      y[i] = 0.5 * static_cast<double>(i) + g(rng);
    }
    const auto r = stats::spearman(x, y);
    const auto rx = stats::average_ranks(x), ry = stats::average_ranks(y);
    const double rho = pearson(rx, ry);
    CHECK(r.rho == doctest::Approx(rho).epsilon(1e-12));
    REQUIRE(r.exact);

    std::vector<double> perm = ry;
    std::sort(perm.begin(), perm.end());
    std::size_t total = 0, less = 0, extreme = 0;
    do {
      const double v = pearson(rx, perm);
      ++total;
      less += v <= rho + 1e-12;
      extreme += std::abs(v) >= std::abs(rho) - 1e-12;
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(r.p_exact_less == doctest::Approx(static_cast<double>(less) / total).epsilon(1e-12));
    CHECK(r.p_exact_two_sided == doctest::Approx(static_cast<double>(extreme) / total).epsilon(1e-12));
  }
}

TEST_CASE("Spearman t approximation against reference values") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8}, y{2, 1, 4, 3, 7, 8, 6, 5};
  const auto r = stats::spearman(x, y);
  CHECK(r.rho == doctest::Approx(0.7380952380952381).epsilon(1e-12));
  CHECK(r.p_two_sided == doctest::Approx(0.03655276105286081).epsilon(1e-8));
}

TEST_CASE("Kolmogorov survival function against reference values") {
  CHECK(stats::kolmogorov_q(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
  CHECK(stats::kolmogorov_q(1.36) == doctest::Approx(0.049485876755377876).epsilon(1e-10));
  CHECK(stats::kolmogorov_q(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-10));
}

TEST_CASE("KS statistic is the largest ECDF gap") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> a(40), b(55);
  for (double& v : a) v = g(rng);
  for (double& v : b) v = g(rng) + 0.3;
  double d = 0.0;
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  for (double t : all) {
    const double fa = std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; }) / 40.0;
    const double fb = std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; }) / 55.0;
    d = std::max(d, std::abs(fa - fb));
  }
  const auto r = stats::ks_two_sample(a, b);
  CHECK(r.d == doctest::Approx(d).epsilon(1e-15));
  CHECK(r.p > 0.0);
  CHECK(r.p <= 1.0);
  CHECK(stats::ks_two_sample(a, a).p == doctest::Approx(1.0));
}

TEST_CASE("binomial acceptance interval meets its tail bounds") {
  for (auto [n, p] : {std::pair<std::size_t, double>{1000, 0.01}, {200, 0.05}, {50, 0.3}}) {
    const auto ci = stats::binomial_acceptance(n, p, 0.95);
    double below = 0.0, above = 0.0;
    for (std::size_t k = 0; k < ci.lo; ++k) below += binomial_pmf(n, k, p);
    for (std::size_t k = ci.hi + 1; k <= n; ++k) above += binomial_pmf(n, k, p);
    CHECK(below <= 0.025 + 1e-12);
    CHECK(above <= 0.025 + 1e-12);
    // Tightness: widening by one count on either side would violate the tail bound.
    CHECK(below + binomial_pmf(n, ci.lo, p) > 0.025);
    CHECK(above + binomial_pmf(n, ci.hi, p) > 0.025);
  }
  const auto ci = stats::binomial_acceptance(1000, 0.01, 0.95);
  CHECK(ci.lo == 4);
  CHECK(ci.hi == 17);
}
