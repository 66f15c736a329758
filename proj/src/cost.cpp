#include "inrd/cost.hpp"

#include <stdexcept>
#include <string>

namespace inrd {

ActionDist::ActionDist(Vec64 probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("ActionDist: empty");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("ActionDist: entries must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("ActionDist: probabilities sum to " + std::to_string(total));
}

ActionDist ActionDist::one_hot(std::size_t num_actions, std::size_t action) {
  if (action >= num_actions) throw std::out_of_range("ActionDist::one_hot: action out of range");
  Vec64 p(num_actions, 0.0);
  p[action] = 1.0;
  return ActionDist(std::move(p));
}

ActionDist ActionDist::uniform(std::size_t num_actions) {
  return ActionDist(Vec64(num_actions, 1.0 / static_cast<double>(num_actions)));
}

double cost(const PolicyNet& net, ConstVecView s, const ActionDist& tau) {
  require_same_size(tau.size(), net.num_actions(), "cost: tau");
  const Vec64 logp = log_softmax(net.forward(s));
  double j = 0.0;
  for (std::size_t a = 0; a < logp.size(); ++a)
    if (tau[a] > 0.0) j -= tau[a] * logp[a];
  return j;
}

double NetCost::cost(ConstVecView s, const ActionDist& tau) const { return inrd::cost(*net_, s, tau); }

Vec64 NetCost::cost_gradient(ConstVecView s, const ActionDist& tau) const {
  return grad_input(*net_, s, tau.probs());
}

SelfCost NetCost::self_cost(ConstVecView s) const {
  const Vec64 z = net_->forward(s);
  const std::size_t a = argmax(z);
  return {-log_softmax(z)[a], a};
}

ActionDist argmax_policy(const PolicyNet& net, ConstVecView s) {
  return ActionDist::one_hot(net.num_actions(), argmax(net.forward(s)));
}

ActionDist argmax_policy(const CostModel& model, ConstVecView s) {
  return ActionDist::one_hot(model.num_actions(), model.greedy_action(s));
}

}  // namespace inrd
