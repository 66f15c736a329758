#include "inrd/attacks.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace inrd {

std::string to_string(AttackMethod m) {
  switch (m) {
    case AttackMethod::fgsm: return "fgsm";
    case AttackMethod::ifgsm: return "ifgsm";
    case AttackMethod::mifgsm: return "mifgsm";
    case AttackMethod::nesterov: return "nesterov";
    case AttackMethod::deepfool: return "deepfool";
    case AttackMethod::cw: return "cw";
    case AttackMethod::ead: return "ead";
  }
  return "unknown";
}

AttackMethod attack_method_from_string(const std::string& name) {
  for (auto m : all_attack_methods())
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown attack method '" + name + "'");
}

const std::vector<AttackMethod>& all_attack_methods() {
  static const std::vector<AttackMethod> methods{AttackMethod::fgsm,     AttackMethod::ifgsm,
                                                 AttackMethod::mifgsm,   AttackMethod::nesterov,
                                                 AttackMethod::deepfool, AttackMethod::cw,
                                                 AttackMethod::ead};
  return methods;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
  if (!(clip_lo < clip_hi)) throw std::invalid_argument("AttackConfig: empty clip box");
  switch (method) {
    case AttackMethod::fgsm: break;
    case AttackMethod::ifgsm:
    case AttackMethod::mifgsm:
    case AttackMethod::nesterov:
      if (iters < 1) throw std::invalid_argument("AttackConfig: iters must be >= 1");
      if (!(alpha_step > 0.0)) throw std::invalid_argument("AttackConfig: alpha_step must be positive");
      if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("AttackConfig: mu must be in [0,1]");
      break;
    case AttackMethod::deepfool:
      if (iters < 1) throw std::invalid_argument("AttackConfig: iters must be >= 1");
      if (!(overshoot >= 0.0)) throw std::invalid_argument("AttackConfig: overshoot must be >= 0");
      break;
    case AttackMethod::cw:
    case AttackMethod::ead:
      if (iters < 1) throw std::invalid_argument("AttackConfig: iters must be >= 1");
      if (!(lr > 0.0) || !(c > 0.0)) throw std::invalid_argument("AttackConfig: lr and c must be positive");
      if (!(kappa >= 0.0)) throw std::invalid_argument("AttackConfig: kappa must be >= 0");
      if (method == AttackMethod::ead && (!(lambda1 >= 0.0) || !(lambda2 > 0.0)))
        throw std::invalid_argument("AttackConfig: EAD needs lambda1 >= 0 and lambda2 > 0");
      break;
  }
}

AttackConfig default_attack_config(AttackMethod m) {
  AttackConfig cfg;
  cfg.method = m;
  switch (m) {
    case AttackMethod::fgsm: cfg.iters = 1; break;
    case AttackMethod::ifgsm:
    case AttackMethod::mifgsm:
    case AttackMethod::nesterov:
      cfg.iters = 10;
      cfg.alpha_step = 0.01;
      cfg.mu = m == AttackMethod::ifgsm ? 0.0 : 1.0;
      break;
    case AttackMethod::deepfool: cfg.iters = 50; break;
    case AttackMethod::cw:
    case AttackMethod::ead:
      cfg.iters = 200;
      cfg.c = 10.0;
      cfg.lr = 0.01;
      break;
  }
  return cfg;
}

std::string attack_config_json(const AttackConfig& cfg) {
  nlohmann::json j;
  j["method"] = to_string(cfg.method);
  j["epsilon"] = cfg.epsilon;
  j["alpha_step"] = cfg.alpha_step;
  j["iters"] = cfg.iters;
  j["mu"] = cfg.mu;
  j["overshoot"] = cfg.overshoot;
  j["c"] = cfg.c;
  j["kappa"] = cfg.kappa;
  j["lr"] = cfg.lr;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["clip_box"] = {cfg.clip_lo, cfg.clip_hi};
  if (cfg.target) j["target"] = *cfg.target;
  return j.dump(2) + "\n";
}

AttackConfig attack_config_from_json(const std::string& text, std::optional<AttackMethod> method) {
  const auto j = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
  AttackMethod m = method.value_or(AttackMethod::fgsm);
  if (!method && j.contains("method")) m = attack_method_from_string(j["method"].get<std::string>());
  AttackConfig cfg = default_attack_config(m);
  cfg.epsilon = j.value("epsilon", cfg.epsilon);
  cfg.alpha_step = j.value("alpha_step", cfg.alpha_step);
  cfg.iters = j.value("iters", cfg.iters);
  cfg.mu = j.value("mu", cfg.mu);
  cfg.overshoot = j.value("overshoot", cfg.overshoot);
  cfg.c = j.value("c", cfg.c);
  cfg.kappa = j.value("kappa", cfg.kappa);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.lambda1 = j.value("lambda1", cfg.lambda1);
  cfg.lambda2 = j.value("lambda2", cfg.lambda2);
  if (j.contains("clip_box")) {
    cfg.clip_lo = j["clip_box"].at(0).get<double>();
    cfg.clip_hi = j["clip_box"].at(1).get<double>();
  }
  if (j.contains("target") && !j["target"].is_null()) cfg.target = j["target"].get<std::size_t>();
  cfg.validate();
  return cfg;
}

AttackResult make_result(const Vec64& s_bar, Vec64 s_adv, bool success, int iters, AttackMethod m) {
  const Vec64 delta = sub(s_adv, s_bar);
  AttackResult r;
  r.linf = norm_linf(delta);
  r.l2 = norm_l2(delta);
  r.l1 = norm_l1(delta);
  r.s_adv = std::move(s_adv);
  r.success = success;
  r.iters_used = iters;
  r.method = m;
  return r;
}

double attack_margin(ConstVecView z, std::size_t original, std::optional<std::size_t> target) {
  const std::size_t anchor = target.value_or(original);
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < z.size(); ++a)
    if (a != anchor) best_other = std::max(best_other, z[a]);
  return target ? best_other - z[anchor] : z[anchor] - best_other;
}

namespace {

struct SignSetup {
  ActionDist tau;
  double orientation;  // +1 ascend J, −1 descend
  std::size_t original;
};

SignSetup sign_setup(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg) {
  require_same_size(s_bar.size(), model.input_dim(), "attack: observation");
  const std::size_t original = cfg.original_action.value_or(model.greedy_action(s_bar));
  if (cfg.target) return {ActionDist::one_hot(model.num_actions(), *cfg.target), -1.0, original};
  return {ActionDist::one_hot(model.num_actions(), original), 1.0, original};
}

bool sign_success(const CostModel& model, ConstVecView s, const SignSetup& setup,
                  const AttackConfig& cfg) {
  const std::size_t a = model.greedy_action(s);
  return cfg.target ? a == *cfg.target : a != setup.original;
}

// x ← clip_box(clip_ε(x + α·d)), d a sign vector.
void sign_step(Vec64& x, ConstVecView direction, double alpha, ConstVecView s_bar,
               const AttackConfig& cfg) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double moved = x[i] + alpha * direction[i];
    const double in_ball = std::clamp(moved, s_bar[i] - cfg.epsilon, s_bar[i] + cfg.epsilon);
    x[i] = std::clamp(in_ball, cfg.clip_lo, cfg.clip_hi);
  }
}

// Shared loop of I-FGSM, MI-FGSM and the Nesterov variant.
AttackResult momentum_sign_attack(const CostModel& model, ConstVecView s_bar,
                                  const AttackConfig& cfg, bool lookahead) {
  const SignSetup setup = sign_setup(model, s_bar, cfg);
  Vec64 x(s_bar.begin(), s_bar.end());
  Vec64 momentum(x.size(), 0.0);
  const bool use_momentum = cfg.method != AttackMethod::ifgsm;
  for (int it = 0; it < cfg.iters; ++it) {
    Vec64 probe = x;
    if (lookahead) axpy(cfg.alpha_step * cfg.mu, momentum, probe);
    Vec64 g = model.cost_gradient(probe, setup.tau);
    for (double& v : g) v *= setup.orientation;
    if (use_momentum) {
      const double l1 = norm_l1(g);
      const double inv = l1 < 1e-12 ? 1.0 : 1.0 / l1;
      for (std::size_t i = 0; i < g.size(); ++i) momentum[i] = cfg.mu * momentum[i] + g[i] * inv;
      sign_step(x, sign(momentum), cfg.alpha_step, s_bar, cfg);
    } else {
      sign_step(x, sign(g), cfg.alpha_step, s_bar, cfg);
    }
  }
  const bool ok = sign_success(model, x, setup, cfg);
  return make_result(Vec64(s_bar.begin(), s_bar.end()), std::move(x), ok, cfg.iters, cfg.method);
}

}  // namespace

AttackResult fgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg) {
  const SignSetup setup = sign_setup(model, s_bar, cfg);
  const Vec64 base(s_bar.begin(), s_bar.end());
  if (cfg.epsilon == 0.0) return make_result(base, base, false, 0, AttackMethod::fgsm);
  Vec64 g = model.cost_gradient(s_bar, setup.tau);
  for (double& v : g) v *= setup.orientation;
  Vec64 x = base;
  sign_step(x, sign(g), cfg.epsilon, s_bar, cfg);
  const bool ok = sign_success(model, x, setup, cfg);
  return make_result(base, std::move(x), ok, 1, AttackMethod::fgsm);
}

AttackResult ifgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.method = AttackMethod::ifgsm;
  return momentum_sign_attack(model, s_bar, c, false);
}

AttackResult mifgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.method = AttackMethod::mifgsm;
  return momentum_sign_attack(model, s_bar, c, false);
}

AttackResult nesterov(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.method = AttackMethod::nesterov;
  return momentum_sign_attack(model, s_bar, c, true);
}

AttackResult deepfool(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg) {
  require_same_size(s_bar.size(), net.input_dim(), "deepfool: observation");
  const std::size_t classes = net.num_actions();
  if (classes < 2) throw std::invalid_argument("deepfool: need at least two actions");
  const Vec64 base(s_bar.begin(), s_bar.end());
  const std::size_t original = cfg.original_action.value_or(argmax(net.forward(base)));
  const double scale = 1.0 + cfg.overshoot;

  Vec64 total(base.size(), 0.0);
  Vec64 x = base;
  int it = 0;
  for (; it < cfg.iters; ++it) {
    const ForwardTape tape = net.record(x);
    const Vec64& z = tape.logits();
    const std::size_t current = argmax(z);
    if (cfg.target ? current == *cfg.target : current != original) break;

    Vec64 cot(classes, 0.0);
    cot[original] = -1.0;
    double best_dist = std::numeric_limits<double>::infinity();
    Vec64 best_step;
    for (std::size_t k = 0; k < classes; ++k) {
      if (k == original || (cfg.target && k != *cfg.target)) continue;
      cot[k] = 1.0;
      const Vec64 w = net.backward(tape, cot);  // ∇(z_k − z_orig)
      cot[k] = 0.0;
      const double wn2 = dot(w, w);
      if (wn2 == 0.0) continue;
      const double gap = std::max(std::abs(z[k] - z[original]), 1e-12);
      const double dist = gap / std::sqrt(wn2);
      if (dist < best_dist) {
        best_dist = dist;
        best_step = scaled(w, gap / wn2);
      }
    }
    if (best_step.empty()) break;  // flat logits: no hyperplane to project onto
    axpy(1.0, best_step, total);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::clamp(base[i] + scale * total[i], cfg.clip_lo, cfg.clip_hi);
  }
  const std::size_t final_action = argmax(net.forward(x));
  const bool ok = cfg.target ? final_action == *cfg.target : final_action != original;
  return make_result(base, std::move(x), ok, it, AttackMethod::deepfool);
}

namespace {

struct AdamState {
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void step(Vec64& w, ConstVecView g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(0.9, t);
    const double c2 = 1.0 - std::pow(0.999, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
    }
  }
  Vec64 m, v;
  int t = 0;
};

struct MarginEval {
  double margin;
  bool success;
  Vec64 grad;  // ∇_s margin, only filled when requested
};

MarginEval eval_margin(const PolicyNet& net, ConstVecView s, std::size_t original,
                       const AttackConfig& cfg, bool want_grad) {
  const ForwardTape tape = net.record(s);
  const Vec64& z = tape.logits();
  const double m = attack_margin(z, original, cfg.target);
  const std::size_t top = argmax(z);
  const bool flipped = cfg.target ? top == *cfg.target : top != original;
  MarginEval out{m, flipped && m <= -cfg.kappa, {}};
  if (want_grad) {
    const std::size_t anchor = cfg.target.value_or(original);
    std::size_t other = anchor == 0 ? 1 : 0;
    for (std::size_t a = 0; a < z.size(); ++a)
      if (a != anchor && z[a] > z[other]) other = a;
    Vec64 cot(z.size(), 0.0);
    cot[anchor] = cfg.target ? -1.0 : 1.0;
    cot[other] = cfg.target ? 1.0 : -1.0;
    out.grad = net.backward(tape, cot);
  }
  return out;
}

std::size_t original_action(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg) {
  return cfg.original_action.value_or(argmax(net.forward(s_bar)));
}

}  // namespace

AttackResult carlini_wagner(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg,
                            const CwHooks& hooks) {
  require_same_size(s_bar.size(), net.input_dim(), "carlini_wagner: observation");
  const Vec64 base(s_bar.begin(), s_bar.end());
  const std::size_t original = original_action(net, base, cfg);
  const double half_width = 0.5 * (cfg.clip_hi - cfg.clip_lo);
  const double mid = 0.5 * (cfg.clip_hi + cfg.clip_lo);

  Vec64 w(base.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::atanh(std::clamp((base[i] - mid) / half_width, -1.0 + 1e-9, 1.0 - 1e-9));

  Vec64 best;
  double best_score = std::numeric_limits<double>::infinity();
  auto consider = [&](const Vec64& s, double penalty_value) {
    const double score = hooks.score ? hooks.score(s, penalty_value) : norm_l2(sub(s, base));
    if (score < best_score) {
      best_score = score;
      best = s;
    }
  };

  // The unperturbed observation is iterate zero.
  const MarginEval at_base = eval_margin(net, base, original, cfg, false);
  if (at_base.success) consider(base, 0.0);

  AdamState adam(w.size());
  Vec64 s(base.size());
  for (int it = 0; it <= cfg.iters; ++it) {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = mid + half_width * std::tanh(w[i]);
    const MarginEval me = eval_margin(net, s, original, cfg, it < cfg.iters);
    Vec64 grad_s(s.size(), 0.0);
    double penalty_value = 0.0;
    if (hooks.penalty) penalty_value = hooks.penalty(s, grad_s, it);
    const Vec64 delta = sub(s, base);
    const double objective = cfg.c * std::max(me.margin, -cfg.kappa) + dot(delta, delta) + penalty_value;
    if (!std::isfinite(objective))
      throw std::runtime_error("carlini_wagner: non-finite loss at iteration " + std::to_string(it));
    if (hooks.trace) {
      hooks.trace->iterates.push_back(s);
      hooks.trace->penalty_values.push_back(penalty_value);
      hooks.trace->objective_values.push_back(objective);
    }
    if (me.success) consider(s, penalty_value);
    if (it == cfg.iters) break;

    if (me.margin > -cfg.kappa) axpy(cfg.c, me.grad, grad_s);
    axpy(2.0, delta, grad_s);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double t = std::tanh(w[i]);
      grad_s[i] *= half_width * (1.0 - t * t);
    }
    adam.step(w, grad_s, cfg.lr);
  }

  if (best.empty()) return make_result(base, base, false, cfg.iters, AttackMethod::cw);
  return make_result(base, std::move(best), true, cfg.iters, AttackMethod::cw);
}

AttackResult ead(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg, CwTrace* trace) {
  require_same_size(s_bar.size(), net.input_dim(), "ead: observation");
  const Vec64 base(s_bar.begin(), s_bar.end());
  const std::size_t original = original_action(net, base, cfg);
  const double shrink = cfg.lr * cfg.lambda1;

  Vec64 best;
  double best_score = std::numeric_limits<double>::infinity();
  Vec64 x = base;
  for (int it = 0; it <= cfg.iters; ++it) {
    const MarginEval me = eval_margin(net, x, original, cfg, it < cfg.iters);
    const Vec64 delta = sub(x, base);
    const double en = cfg.lambda1 * norm_l1(delta) + cfg.lambda2 * dot(delta, delta);
    const double objective = cfg.c * std::max(me.margin, -cfg.kappa) + en;
    if (!std::isfinite(objective))
      throw std::runtime_error("ead: non-finite loss at iteration " + std::to_string(it));
    if (trace) {
      trace->iterates.push_back(x);
      trace->penalty_values.push_back(0.0);
      trace->objective_values.push_back(objective);
    }
    if (me.success && en < best_score) {
      best_score = en;
      best = x;
    }
    if (it == cfg.iters) break;

    Vec64 g = scaled(delta, 2.0 * cfg.lambda2);
    if (me.margin > -cfg.kappa) axpy(cfg.c, me.grad, g);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - cfg.lr * g[i] - base[i];
      const double shrunk = std::abs(d) <= shrink ? 0.0 : d - std::copysign(shrink, d);
      x[i] = std::clamp(base[i] + shrunk, cfg.clip_lo, cfg.clip_hi);
    }
  }
  if (best.empty()) return make_result(base, base, false, cfg.iters, AttackMethod::ead);
  return make_result(base, std::move(best), true, cfg.iters, AttackMethod::ead);
}

AttackResult run_attack(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg) {
  cfg.validate();
  const NetCost model(net);
  switch (cfg.method) {
    case AttackMethod::fgsm: return fgsm(model, s_bar, cfg);
    case AttackMethod::ifgsm: return ifgsm(model, s_bar, cfg);
    case AttackMethod::mifgsm: return mifgsm(model, s_bar, cfg);
    case AttackMethod::nesterov: return nesterov(model, s_bar, cfg);
    case AttackMethod::deepfool: return deepfool(net, s_bar, cfg);
    case AttackMethod::cw: return carlini_wagner(net, s_bar, cfg);
    case AttackMethod::ead: return ead(net, s_bar, cfg);
  }
  throw std::logic_error("run_attack: unhandled method");
}

}  // namespace inrd
