#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "inrd/cost.hpp"
#include "inrd/detector.hpp"
#include "inrd/finite_diff.hpp"
#include "inrd/seeding.hpp"

using namespace inrd;
using namespace testing;

namespace {

Mat64 diag(std::initializer_list<double> d) {
  Mat64 m(d.size(), d.size());
  std::size_t i = 0;
  for (double v : d) m(i, i) = v, ++i;
  return m;
}

CalibrationProfile manual_profile(double mean, double std, double t) {
  CalibrationProfile p;
  p.mean = mean;
  p.std = std;
  p.n = 100;
  p.t = t;
  return p;
}

}  // namespace

TEST_CASE("cost examples") {
  const PolicyNet sharp = linear_net(Mat64(2, 1), {100.0, -100.0});
  CHECK(cost(sharp, Vec64{0.0}, ActionDist::one_hot(2, 0)) < 1e-9);
  const PolicyNet flat = linear_net(Mat64(2, 1), {0.0, 0.0});
  CHECK(cost(flat, Vec64{0.0}, ActionDist::one_hot(2, 0)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const PolicyNet net = PolicyNet::random({4, 6, 3}, Activation::tanh, 8);
  const Vec64 s{0.1, 0.9, 0.4, 0.2};
  const Vec64 z = net.forward(s);
  double zmax = std::max({z[0], z[1], z[2]});
  double lse = 0.0;
  for (double v : z) lse += std::exp(v - zmax);
  lse = zmax + std::log(lse);
  double want = 0.0;
  for (double v : z) want -= (v - lse) / 3.0;
  CHECK(cost(net, s, ActionDist::uniform(3)) == doctest::Approx(want).epsilon(1e-12));
  CHECK(cost(net, s, ActionDist::one_hot(3, 1)) >= 0.0);
}

TEST_CASE("ActionDist validation") {
  CHECK_THROWS_AS(ActionDist(Vec64{0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(ActionDist(Vec64{-0.1, 1.1}), std::invalid_argument);
  CHECK_NOTHROW(ActionDist(Vec64{0.25, 0.75}));
}

TEST_CASE("argmax_policy examples") {
  const PolicyNet a = linear_net(Mat64(3, 1), {1.0, 3.0, 2.0});
  CHECK(argmax_policy(a, Vec64{0.0}).probs() == Vec64{0.0, 1.0, 0.0});
  const PolicyNet tie = linear_net(Mat64(2, 1), {2.0, 2.0});
  CHECK(argmax_policy(tie, Vec64{0.0}).probs() == Vec64{1.0, 0.0});
  const PolicyNet shifted = linear_net(Mat64(3, 1), {11.0, 13.0, 12.0});
  CHECK(argmax_policy(shifted, Vec64{0.0}) == argmax_policy(a, Vec64{0.0}));
}

TEST_CASE("probe_direction examples") {
  const Vec64 e1 = probe_from_gradient(Vec64{3.0, 4.0}, 0.1);
  CHECK(e1[0] == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(e1[1] == doctest::Approx(0.02).epsilon(1e-15));
  const Vec64 e2 = probe_from_gradient(Vec64{-3.0, 4.0}, 0.1);
  CHECK(e2[0] == doctest::Approx(-0.02).epsilon(1e-15));
  CHECK(e2[1] == doctest::Approx(0.02).epsilon(1e-15));
  CHECK_THROWS_AS(probe_from_gradient(Vec64{0.0, 1e-13}, 0.1), DegenerateGradient);
}

TEST_CASE("probe norm identity ||eta|| = eps*sqrt(D)/||g||") {
  const PolicyNet net = PolicyNet::random({12, 10, 4}, Activation::tanh, 31);
  const NetCost model(net);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 100; ++k) {
    const Vec64 s = random_vec(12, rng, 0.0, 1.0);
    const Vec64 g = model.cost_gradient(s, argmax_policy(model, s));
    const Vec64 eta = probe_direction(model, s, 0.01);
    CHECK(norm_l2(eta) == doctest::Approx(0.01 * std::sqrt(12.0) / norm_l2(g)).epsilon(1e-12));
  }
}

TEST_CASE("so_stat on a quadratic equals eta^T A eta") {
  const QuadraticCost q(diag({2.0, -3.0}), Vec64{0.0, 1.0});
  CHECK(so_stat(q, Vec64{0.0, 0.0}, 0.1) == doctest::Approx(-0.03).epsilon(1e-12));
}

TEST_CASE("so_stat vanishes on linear costs") {
  const QuadraticCost lin(Mat64(3, 3), Vec64{0.3, -1.2, 0.8});
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) CHECK(std::abs(so_stat(lin, random_vec(3, rng), 0.05)) < 1e-10);
}

TEST_CASE("so_stat approaches half the FD-Hessian quadratic form as epsilon shrinks") {
  // L − ½ηᵀHη is the cubic Taylor remainder, so the relative gap is O(ε).
  const PolicyNet net = PolicyNet::random({2, 8, 2}, Activation::tanh, 17);
  const NetCost model(net);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const Vec64 s = random_vec(2, rng);
    const auto tau = argmax_policy(model, s);
    const Mat64 h = fd_hessian([&](ConstVecView x) { return model.cost(x, tau); }, s);
    auto rel_gap = [&](double eps) {
      const Vec64 eta = probe_direction(model, s, eps);
      const double quad = 0.5 * dot(eta, matvec(h, eta));
      return std::abs(so_stat(model, s, eps) - quad) / std::abs(quad);
    };
    const double coarse = rel_gap(1e-2), fine = rel_gap(5e-3);
    CHECK(coarse < 1e-2);
    CHECK(fine < 5e-3);
    if (coarse > 1e-3) CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.2));
  }
}

TEST_CASE("so_stat costs one gradient and two cost evaluations") {
  const PolicyNet net = PolicyNet::random({10, 8, 4}, Activation::relu, 1);
  const NetCost inner(net);
  const CountingCostModel counted(inner);
  so_stat(counted, Vec64(10, 0.3), 0.01);
  CHECK(counted.gradient_calls() == 1);
  CHECK(counted.cost_calls() == 2);
}

TEST_CASE("fo_stat examples") {
  const PolicyNet net = PolicyNet::random({6, 8, 3}, Activation::tanh, 4);
  const NetCost model(net);
  CHECK(std::abs(fo_stat(model, Vec64(6, 0.5), 1e-8, 3)) < 1e-4);

  const Vec64 g{0.5, -1.0, 2.0};
  const QuadraticCost lin(Mat64(3, 3), g);
  const Vec64 eta = fo_noise(3, 0.01, 77);
  CHECK(fo_stat_with_noise(lin, Vec64{0.1, 0.2, 0.3}, eta) == doctest::Approx(dot(g, eta)).epsilon(1e-12));
  CHECK(fo_stat(lin, Vec64{0.1, 0.2, 0.3}, 0.01, 77) == fo_stat_with_noise(lin, Vec64{0.1, 0.2, 0.3}, eta));
}

TEST_CASE("mean of K on s^T A s at the origin is eps * trace(A)") {
  std::mt19937_64 rng(13);
  const Mat64 a = random_symmetric(5, rng);
  const QuadraticCost q(a, Vec64(5, 0.0));
  const double eps = 0.01;
  const int n = 10000;
  double sum = 0.0, sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = fo_stat(q, Vec64(5, 0.0), eps, derive_seed(1, {static_cast<std::uint64_t>(k)}));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  double trace = 0.0;
  for (int i = 0; i < 5; ++i) trace += a(i, i);
  CHECK(std::abs(mean - eps * trace) < 3.0 * se);
}

TEST_CASE("calibration arithmetic and degenerate cases") {
  const Vec64 two{-1.0, -3.0};
  const auto p = profile_from_values(two, Statistic::so, 0.01, 0);
  CHECK(p.mean == -2.0);
  CHECK(p.std == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(p.n == 2);
  CHECK_FALSE(p.t.has_value());
  CHECK_THROWS_AS(profile_from_values(Vec64{0.5, 0.5, 0.5}, Statistic::so, 0.01, 0), DegenerateCalibration);
  CHECK_THROWS_AS(profile_from_values(Vec64{0.5}, Statistic::so, 0.01, 0), DegenerateCalibration);

}

TEST_CASE("calibration skips states with a vanishing gradient") {
  const QuadraticCost q(diag({1.0, 2.0}), Vec64{0.0, 0.0});
  const std::vector<Vec64> states{{0.0, 0.0}, {0.1, 0.3}, {0.5, -0.2}, {-0.4, 0.9}};
  const auto run = calibrate(q, states, 0.01, Statistic::so, 0);
  CHECK(run.profile.skipped_degenerate == 1);
  CHECK(run.profile.n == 3);
  CHECK(run.values.size() == 3);
}

TEST_CASE("calibration is reproducible bitwise, independent of thread count") {
  const PolicyNet net = PolicyNet::random({16, 12, 4}, Activation::relu, 19);
  const NetCost model(net);
  std::mt19937_64 rng(8);
  std::vector<Vec64> states;
  for (int k = 0; k < 64; ++k) states.push_back(random_vec(16, rng, 0.0, 1.0));
  for (auto stat : {Statistic::so, Statistic::fo}) {
    const auto a = calibrate(model, states, 0.01, stat, 5, 1);
    const auto b = calibrate(model, states, 0.01, stat, 5, 4);
    CHECK(profile_json(a.profile) == profile_json(b.profile));
    CHECK(a.values == b.values);
  }
}

TEST_CASE("choose_threshold uses the lower-interpolated quantile") {
  const Vec64 z{0.3, 0.1, 0.5, 0.2, 0.9, 0.4, 1.0, 0.6, 0.8, 0.7};
  const auto p = manual_profile(0.0, 1.0, 0.0);
  const double t = choose_threshold(p, z, 0.2);
  Vec64 sorted = z;
  std::sort(sorted.begin(), sorted.end());
  CHECK(t == sorted[static_cast<std::size_t>(std::floor(9 * 0.8))]);
  CHECK(t == 0.8);
  CHECK(choose_threshold(p, z, 0.999) == 0.1);
  CHECK_THROWS_AS(choose_threshold(p, z, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(choose_threshold(p, z, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(choose_threshold(p, z, 1.0), std::invalid_argument);
}

TEST_CASE("threshold from raw statistic values flags the target fraction of its own calibration set") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(5.0, 2.0);
  Vec64 values(1000);
  for (double& v : values) v = g(rng);
  CalibrationProfile p = profile_from_values(values, Statistic::so, 0.01, 0, 0);
  p.t = choose_threshold(p, values, 0.05);
  const auto flagged = std::count_if(values.begin(), values.end(), [&](double v) { return detect_value(p, v).flagged; });
  CHECK(flagged <= 50);
  CHECK(flagged >= 45);
}

TEST_CASE("detect decision rule") {
  const auto p = manual_profile(-0.5, 0.1, 3.0);
  const Detection d = detect_value(p, 0.2);
  CHECK(d.z_abs == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(d.flagged);
  CHECK_FALSE(detect_value(p, -0.5).flagged);
  CHECK_FALSE(detect_value(manual_profile(-0.5, 0.1, 1e-9), -0.5).flagged);

  // Same decision after a common positive rescaling and shift.
  for (double v : {-0.9, -0.79, -0.5, -0.2, -0.21, 0.4}) {
    const double k = 3.7, b = 12.0;
    const auto scaled = manual_profile(k * -0.5 + b, k * 0.1, 3.0);
    CHECK(detect_value(p, v).flagged == detect_value(scaled, k * v + b).flagged);
  }
}

TEST_CASE("two-sided rule flags values far below the mean; one-sided does not") {
  auto p = manual_profile(0.0, 1.0, 2.0);
  CHECK(detect_value(p, -5.0).flagged);
  p.one_sided = true;
  CHECK_FALSE(detect_value(p, -5.0).flagged);
  CHECK(detect_value(p, 5.0).flagged);
}

TEST_CASE("detect flags states where the probe is undefined") {
  const QuadraticCost q(diag({1.0, 1.0}), Vec64{0.0, 0.0});
  auto p = manual_profile(0.0, 1.0, 100.0);
  const Detection d = detect(q, Vec64{0.0, 0.0}, p);
  CHECK(d.flagged);
  CHECK(d.reason == "degenerate_gradient");
  p.t.reset();
  CHECK_THROWS(detect(q, Vec64{1.0, 0.0}, p));
}

TEST_CASE("profile JSON round trip") {
  auto p = manual_profile(-0.25, 0.125, 2.5);
  p.statistic = Statistic::fo;
  p.target_fpr = 0.01;
  p.seed = 99;
  p.skipped_degenerate = 3;
  const auto back = profile_from_json(profile_json(p));
  CHECK(profile_json(back) == profile_json(p));
}

TEST_CASE("verify_prop1 on a convex quadratic") {
  const QuadraticCost q(diag({1.0, 0.5, 2.0}), Vec64{0.3, -0.1, 0.2});
  const auto r = verify_prop1(q, Vec64{1.0, 1.0, 1.0}, ActionDist::one_hot(2, 0), 1.0);
  REQUIRE(r.converged);
  CHECK(r.lambda_min == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.margin > 0.0);
  CHECK(r.gradient_residual < 1e-5);
}

TEST_CASE("verify_prop1 on seeded tanh 2-8-2 nets") {
  std::mt19937_64 rng(3);
  int converged = 0;
  for (int k = 0; k < 5; ++k) {
    const PolicyNet net = PolicyNet::random({2, 8, 2}, Activation::tanh, 500 + k);
    const NetCost model(net);
    const Vec64 s0 = random_vec(2, rng);
    const auto tau = ActionDist::one_hot(2, 1 - argmax(net.forward(s0)));
    const auto r = verify_prop1(model, s0, tau, 1.0);
    if (!r.converged) continue;
    ++converged;
    CHECK(r.margin >= -1e-3);
    CHECK(r.gradient_residual < 1e-5);
  }
  CHECK(converged > 0);
}
