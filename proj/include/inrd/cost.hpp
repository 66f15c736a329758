#pragma once

#include <atomic>
#include <cstddef>

#include "inrd/linalg.hpp"
#include "inrd/policy_net.hpp"

namespace inrd {

/// Probability vector over the discrete action set.
class ActionDist {
 public:
  /// Throws if any entry is negative/non-finite or the sum deviates from 1 by more than 1e-9.
  explicit ActionDist(Vec64 probs);

  static ActionDist one_hot(std::size_t num_actions, std::size_t action);
  static ActionDist uniform(std::size_t num_actions);

  const Vec64& probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t a) const { return probs_[a]; }
  bool operator==(const ActionDist&) const = default;

 private:
  Vec64 probs_;
};

/// Cost of the greedy policy at a state and the greedy action itself.
struct SelfCost {
  double value = 0.0;
  std::size_t action = 0;
};

/// A differentiable cost J(s, τ) over observations, with its greedy action.
/// The network-backed model is the production implementation; analytic surrogates
/// (quadratics, linear fields) implement it in tests.
class CostModel {
 public:
  virtual ~CostModel() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_actions() const = 0;
  /// J(s, τ).
  virtual double cost(ConstVecView s, const ActionDist& tau) const = 0;
  /// ∇_s J(s, τ).
  virtual Vec64 cost_gradient(ConstVecView s, const ActionDist& tau) const = 0;
  /// J(s, π*(·|s)) and argmax_a π(a|s), from one policy evaluation.
  virtual SelfCost self_cost(ConstVecView s) const = 0;

  std::size_t greedy_action(ConstVecView s) const { return self_cost(s).action; }
};

/// J(s, τ) = −Σ_a τ(a) log softmax(z(s))_a over the network's logits.
class NetCost final : public CostModel {
 public:
  explicit NetCost(const PolicyNet& net) : net_(&net) {}

  std::size_t input_dim() const override { return net_->input_dim(); }
  std::size_t num_actions() const override { return net_->num_actions(); }
  double cost(ConstVecView s, const ActionDist& tau) const override;
  Vec64 cost_gradient(ConstVecView s, const ActionDist& tau) const override;
  SelfCost self_cost(ConstVecView s) const override;

  const PolicyNet& net() const noexcept { return *net_; }

 private:
  const PolicyNet* net_;
};

/// Decorator counting cost and gradient evaluations.
class CountingCostModel final : public CostModel {
 public:
  explicit CountingCostModel(const CostModel& inner) : inner_(&inner) {}

  std::size_t input_dim() const override { return inner_->input_dim(); }
  std::size_t num_actions() const override { return inner_->num_actions(); }
  double cost(ConstVecView s, const ActionDist& tau) const override {
    ++cost_calls_;
    return inner_->cost(s, tau);
  }
  Vec64 cost_gradient(ConstVecView s, const ActionDist& tau) const override {
    ++gradient_calls_;
    return inner_->cost_gradient(s, tau);
  }
  SelfCost self_cost(ConstVecView s) const override {
    ++cost_calls_;
    return inner_->self_cost(s);
  }

  std::size_t cost_calls() const noexcept { return cost_calls_; }
  std::size_t gradient_calls() const noexcept { return gradient_calls_; }
  void reset() noexcept {
    cost_calls_ = 0;
    gradient_calls_ = 0;
  }

 private:
  const CostModel* inner_;
  mutable std::atomic<std::size_t> cost_calls_{0};
  mutable std::atomic<std::size_t> gradient_calls_{0};
};

/// Cross-entropy cost of the network policy, computed from log-softmax.
double cost(const PolicyNet& net, ConstVecView s, const ActionDist& tau);

/// One-hot distribution on the highest-logit action (lowest index on ties).
ActionDist argmax_policy(const PolicyNet& net, ConstVecView s);
ActionDist argmax_policy(const CostModel& model, ConstVecView s);

}  // namespace inrd
