#pragma once

#include <random>

#include "inrd/cost.hpp"
#include "inrd/linalg.hpp"
#include "inrd/policy_net.hpp"

namespace testing {

using namespace inrd;

/// J(s) = sᵀAs + bᵀs, independent of τ. Greedy action is always 0.
class QuadraticCost final : public CostModel {
 public:
  QuadraticCost(Mat64 a, Vec64 b) : a_(std::move(a)), b_(std::move(b)) {}
  std::size_t input_dim() const override { return b_.size(); }
  std::size_t num_actions() const override { return 2; }
  double cost(ConstVecView s, const ActionDist&) const override { return value(s); }
  Vec64 cost_gradient(ConstVecView s, const ActionDist&) const override {
    Vec64 g = add(matvec(a_, s), matvec_transposed(a_, s));
    axpy(1.0, b_, g);
    return g;
  }
  SelfCost self_cost(ConstVecView s) const override { return {value(s), 0}; }

 private:
  double value(ConstVecView s) const { return dot(s, matvec(a_, s)) + dot(b_, s); }
  Mat64 a_;
  Vec64 b_;
};

inline Vec64 random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec64 v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Mat64 random_symmetric(std::size_t n, std::mt19937_64& rng) {
  Mat64 m(n, n);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(rng);
  return m;
}

/// Single affine layer z = W s + b (no hidden layer, so no activation).
inline PolicyNet linear_net(const Mat64& w, const Vec64& b) {
  return PolicyNet({w.cols(), w.rows()}, Activation::relu, {DenseLayer{w, b}});
}

inline double max_relative_error(ConstVecView got, ConstVecView want) {
  const double scale = std::max(1e-8, norm_linf(want));
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
  return worst;
}

}  // namespace testing
