#include "inrd/aware.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "inrd/parallel.hpp"
#include "inrd/seeding.hpp"

namespace inrd {

std::string to_string(AwareKind k) {
  switch (k) {
    case AwareKind::so: return "so";
    case AwareKind::fo: return "fo";
    case AwareKind::featmatch: return "featmatch";
  }
  return "unknown";
}

AwareKind aware_kind_from_string(const std::string& name) {
  if (name == "so") return AwareKind::so;
  if (name == "fo") return AwareKind::fo;
  if (name == "featmatch") return AwareKind::featmatch;
  throw std::invalid_argument("unknown aware kind '" + name + "' (expected so|fo|featmatch)");
}

void AwareConfig::validate() const {
  base.validate();
  if (!(lambda >= 0.0)) throw std::invalid_argument("AwareConfig: lambda must be >= 0");
  if (eot_samples < 1) throw std::invalid_argument("AwareConfig: eot_samples must be >= 1");
  if (!(success_drop_cap >= 0.0 && success_drop_cap <= 1.0))
    throw std::invalid_argument("AwareConfig: success_drop_cap must be in [0,1]");
  if (!(hvp_step > 0.0)) throw std::invalid_argument("AwareConfig: hvp_step must be positive");
  if (!(fm_epsilon >= 0.0) || fm_iters < 1 || !(fm_step > 0.0) || !(fm_min_step > 0.0))
    throw std::invalid_argument("AwareConfig: invalid feature-matching settings");
  if (grid.lr.empty() || grid.iters.empty() || grid.kappa.empty() || grid.lambda.empty())
    throw std::invalid_argument("AwareConfig: every grid axis needs at least one value");
  for (double v : grid.lr)
    if (!(v > 0.0)) throw std::invalid_argument("AwareConfig: grid lr must be positive");
  for (int v : grid.iters)
    if (v < 1) throw std::invalid_argument("AwareConfig: grid iters must be >= 1");
  for (double v : grid.kappa)
    if (!(v >= 0.0)) throw std::invalid_argument("AwareConfig: grid kappa must be >= 0");
  for (double v : grid.lambda)
    if (!(v >= 0.0)) throw std::invalid_argument("AwareConfig: grid lambda must be >= 0");
}

std::string aware_config_json(const AwareConfig& cfg) {
  nlohmann::json j;
  j["base"] = nlohmann::json::parse(attack_config_json(cfg.base));
  j["lambda"] = cfg.lambda;
  j["mode"] = cfg.mode == SoPenaltyMode::bpda ? "bpda" : "no_sign";
  j["eot_samples"] = cfg.eot_samples;
  j["success_drop_cap"] = cfg.success_drop_cap;
  j["hvp_step"] = cfg.hvp_step;
  j["seed"] = cfg.seed;
  j["fm_epsilon"] = cfg.fm_epsilon;
  j["fm_iters"] = cfg.fm_iters;
  j["fm_step"] = cfg.fm_step;
  j["fm_min_step"] = cfg.fm_min_step;
  j["grid"] = {{"lr", cfg.grid.lr}, {"iters", cfg.grid.iters}, {"kappa", cfg.grid.kappa},
               {"lambda", cfg.grid.lambda}};
  return j.dump(2) + "\n";
}

AwareConfig aware_config_from_json(const std::string& text) {
  const auto j = text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text);
  AwareConfig cfg;
  if (j.contains("base")) cfg.base = attack_config_from_json(j["base"].dump(), AttackMethod::cw);
  cfg.lambda = j.value("lambda", cfg.lambda);
  if (j.contains("mode")) {
    const auto mode = j["mode"].get<std::string>();
    if (mode == "bpda")
      cfg.mode = SoPenaltyMode::bpda;
    else if (mode == "no_sign")
      cfg.mode = SoPenaltyMode::no_sign;
    else
      throw std::invalid_argument("AwareConfig: unknown mode '" + mode + "' (expected bpda|no_sign)");
  }
  cfg.eot_samples = j.value("eot_samples", cfg.eot_samples);
  cfg.success_drop_cap = j.value("success_drop_cap", cfg.success_drop_cap);
  cfg.hvp_step = j.value("hvp_step", cfg.hvp_step);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.fm_epsilon = j.value("fm_epsilon", cfg.fm_epsilon);
  cfg.fm_iters = j.value("fm_iters", cfg.fm_iters);
  cfg.fm_step = j.value("fm_step", cfg.fm_step);
  cfg.fm_min_step = j.value("fm_min_step", cfg.fm_min_step);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("lr")) cfg.grid.lr = g["lr"].get<std::vector<double>>();
    if (g.contains("iters")) cfg.grid.iters = g["iters"].get<std::vector<int>>();
    if (g.contains("kappa")) cfg.grid.kappa = g["kappa"].get<std::vector<double>>();
    if (g.contains("lambda")) cfg.grid.lambda = g["lambda"].get<std::vector<double>>();
  }
  cfg.validate();
  return cfg;
}

namespace {

Vec64 one_hot(std::size_t n, std::size_t a) {
  Vec64 t(n, 0.0);
  t[a] = 1.0;
  return t;
}

double cost_at(const PolicyNet& net, ConstVecView s, std::size_t a) {
  return -log_softmax(net.forward(s))[a];
}

std::size_t largest_magnitude(ConstVecView g) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < g.size(); ++i)
    if (std::abs(g[i]) > std::abs(g[k])) k = i;
  return k;
}

/// Dφ(g)ᵀ v for φ(g) = g/(‖g‖₂‖g‖∞).
Vec64 surrogate_jacobian_transposed(ConstVecView g, ConstVecView v) {
  const double n2 = norm_l2(g);
  const std::size_t k = largest_magnitude(g);
  const double m = std::abs(g[k]);
  const double gv = dot(g, v);
  Vec64 out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / (n2 * m) - g[i] * gv / (n2 * n2 * n2 * m);
  out[k] -= sign(g[k]) * gv / (n2 * m * m);
  return out;
}

/// H v by central differences of the input gradient.
Vec64 hessian_vector(const PolicyNet& net, ConstVecView s, ConstVecView tau, ConstVecView v, double h) {
  const double nv = norm_l2(v);
  if (nv == 0.0) return Vec64(v.size(), 0.0);
  Vec64 plus(s.begin(), s.end()), minus(s.begin(), s.end());
  axpy(h / nv, v, plus);
  axpy(-h / nv, v, minus);
  Vec64 out = sub(grad_input(net, plus, tau), grad_input(net, minus, tau));
  for (double& x : out) x *= nv / (2.0 * h);
  return out;
}

double detection_score(const PolicyNet& net, const Vec64& s, const CalibrationProfile& profile) {
  const NetCost model(net);
  const Detection d = detect(model, s, profile);
  return d.z_abs;
}

CwHooks aware_hooks(const PolicyNet& net, const CalibrationProfile& profile, CwTrace* trace) {
  CwHooks hooks;
  hooks.score = [&net, &profile](const Vec64& s, double) { return detection_score(net, s, profile); };
  hooks.trace = trace;
  return hooks;
}

}  // namespace

Vec64 surrogate_probe(ConstVecView g, double epsilon) {
  const double n2 = norm_l2(g);
  if (!(n2 >= kDegenerateGradientNorm)) throw DegenerateGradient();
  const double m = norm_linf(g);
  Vec64 eta(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) eta[i] = epsilon * g[i] / (n2 * m);
  return eta;
}

double so_stat_surrogate(const PolicyNet& net, ConstVecView s, double epsilon) {
  const Vec64 z = net.forward(s);
  const std::size_t a = argmax(z);
  const Vec64 tau = one_hot(z.size(), a);
  const Vec64 g = grad_input(net, s, tau);
  const Vec64 eta = surrogate_probe(g, epsilon);
  return cost_at(net, add(s, eta), a) - (-log_softmax(z)[a] + dot(g, eta));
}

PenaltyEval so_penalty(const PolicyNet& net, ConstVecView s, double epsilon, SoPenaltyMode mode,
                       double hvp_step) {
  const Vec64 z = net.forward(s);
  const std::size_t a = argmax(z);
  const Vec64 tau = one_hot(z.size(), a);
  const double j0 = -log_softmax(z)[a];
  const Vec64 g = grad_input(net, s, tau);

  PenaltyEval out;
  if (!(norm_l2(g) >= kDegenerateGradientNorm)) {
    out.degenerate = true;
    out.grad.assign(s.size(), 0.0);
    return out;
  }
  const Vec64 eta_smooth = surrogate_probe(g, epsilon);
  const Vec64 eta_fwd = mode == SoPenaltyMode::bpda ? probe_from_gradient(g, epsilon) : eta_smooth;
  out.value = cost_at(net, add(s, eta_fwd), a) - (j0 + dot(g, eta_fwd));

  // ∇L̃ = u + H(ε·Dφᵀu − η̃) with u = ∇J(s+η̃) − ∇J(s).
  const Vec64 u = sub(grad_input(net, add(s, eta_smooth), tau), g);
  Vec64 w = surrogate_jacobian_transposed(g, u);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = epsilon * w[i] - eta_smooth[i];
  out.grad = add(u, hessian_vector(net, s, tau, w, hvp_step));
  return out;
}

PenaltyEval eot_penalty(const PolicyNet& net, ConstVecView s, double epsilon, int samples,
                        std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("eot_penalty: samples must be >= 1");
  const Vec64 z = net.forward(s);
  const std::size_t a = argmax(z);
  const Vec64 tau = one_hot(z.size(), a);
  const double j0 = -log_softmax(z)[a];
  const Vec64 g0 = grad_input(net, s, tau);

  PenaltyEval out;
  out.grad.assign(s.size(), 0.0);
  CompensatedSum total;
  for (int k = 0; k < samples; ++k) {
    const Vec64 probe = add(s, fo_noise(s.size(), epsilon, derive_seed(seed, {static_cast<std::uint64_t>(k)})));
    total.add(cost_at(net, probe, a) - j0);
    axpy(1.0, grad_input(net, probe, tau), out.grad);
  }
  const double inv = 1.0 / samples;
  out.value = total.value() * inv;
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] = out.grad[i] * inv - g0[i];
  return out;
}

AttackResult feature_match_attack(const PolicyNet& net, ConstVecView s_bar, ConstVecView target_state,
                                  const AwareConfig& cfg) {
  require_same_size(s_bar.size(), net.input_dim(), "feature_match_attack: observation");
  require_same_size(target_state.size(), net.input_dim(), "feature_match_attack: target");
  const Vec64 base(s_bar.begin(), s_bar.end());
  const Vec64 zt = net.forward(target_state);
  const std::size_t original = argmax(net.forward(base));
  const double lo = cfg.base.clip_lo, hi = cfg.base.clip_hi;

  auto objective = [&](ConstVecView x) {
    const Vec64 d = sub(net.forward(x), zt);
    return dot(d, d);
  };
  auto project = [&](Vec64& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::clamp(std::clamp(x[i], base[i] - cfg.fm_epsilon, base[i] + cfg.fm_epsilon), lo, hi);
  };

  Vec64 x = base;
  double f = objective(x);
  double step = cfg.fm_step;
  int it = 0;
  for (; it < cfg.fm_iters && f > 0.0; ++it) {
    const Vec64 grad = net.pullback(x, [&](const Vec64& z) {
      Vec64 c = sub(z, zt);
      for (double& v : c) v *= 2.0;
      return c;
    });
    Vec64 trial = x;
    axpy(-step, grad, trial);
    project(trial);
    const double f_trial = objective(trial);
    if (f_trial < f) {
      x = std::move(trial);
      f = f_trial;
    } else {
      step *= 0.5;
      if (step < cfg.fm_min_step) break;
    }
  }
  const bool success = argmax(net.forward(x)) != original;
  AttackResult r = make_result(base, std::move(x), success, it, AttackMethod::cw);
  return r;
}

const Vec64& choose_feature_target(const PolicyNet& net, ConstVecView s_bar,
                                   std::span<const Vec64> candidates) {
  const std::size_t original = argmax(net.forward(s_bar));
  const Vec64* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (argmax(net.forward(c)) == original) continue;
    const Vec64 d = sub(c, s_bar);
    const double dist = dot(d, d);
    if (dist < best_d) {
      best_d = dist;
      best = &c;
    }
  }
  if (!best) throw std::runtime_error("choose_feature_target: no candidate state with a different greedy action");
  return *best;
}

AttackResult so_aware_cw(const PolicyNet& net, ConstVecView s_bar, const CalibrationProfile& profile,
                         const AwareConfig& cfg, CwTrace* trace) {
  if (profile.statistic != Statistic::so) throw std::invalid_argument("so_aware_cw: profile must be an SO profile");
  CwHooks hooks = aware_hooks(net, profile, trace);
  if (cfg.lambda > 0.0) {
    hooks.penalty = [&](const Vec64& s, Vec64& grad, int) {
      const PenaltyEval p = so_penalty(net, s, profile.epsilon, cfg.mode, cfg.hvp_step);
      axpy(cfg.lambda, p.grad, grad);
      return cfg.lambda * p.value;
    };
  }
  return carlini_wagner(net, s_bar, cfg.base, hooks);
}

AttackResult fo_aware_attack(const PolicyNet& net, ConstVecView s_bar, const CalibrationProfile& profile,
                             const AwareConfig& cfg, CwTrace* trace) {
  if (profile.statistic != Statistic::fo) throw std::invalid_argument("fo_aware_attack: profile must be an FO profile");
  CwHooks hooks = aware_hooks(net, profile, trace);
  if (cfg.lambda > 0.0) {
    hooks.penalty = [&](const Vec64& s, Vec64& grad, int iteration) {
      const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(iteration)});
      const PenaltyEval p = eot_penalty(net, s, profile.epsilon, cfg.eot_samples, seed);
      axpy(cfg.lambda, p.grad, grad);
      return cfg.lambda * p.value;
    };
  }
  return carlini_wagner(net, s_bar, cfg.base, hooks);
}

namespace {

GridPoint summarize(const PolicyNet& net, const CalibrationProfile& profile,
                    const std::vector<AttackResult>& results) {
  GridPoint p;
  std::vector<double> z;
  std::size_t flagged = 0;
  const NetCost model(net);
  for (const auto& r : results) {
    if (!r.success) continue;
    ++p.successes;
    const Detection d = detect(model, r.s_adv, profile);
    z.push_back(d.z_abs);
    if (d.flagged) ++flagged;
  }
  p.success_rate = results.empty() ? 0.0 : static_cast<double>(p.successes) / static_cast<double>(results.size());
  if (p.successes > 0) {
    p.tpr = static_cast<double>(flagged) / static_cast<double>(p.successes);
    p.median_z = stats::median(z);
  } else {
    p.tpr = std::numeric_limits<double>::quiet_NaN();
    p.median_z = std::numeric_limits<double>::quiet_NaN();
  }
  return p;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json point_json(const GridPoint& p) {
  return {{"lr", p.lr},
          {"iters", p.iters},
          {"kappa", p.kappa},
          {"lambda", p.lambda},
          {"success", p.success_rate},
          {"successes", p.successes},
          {"tpr", number_or_null(p.tpr)},
          {"median_z_abs", number_or_null(p.median_z)},
          {"feasible", p.feasible}};
}

nlohmann::json spearman_json(const stats::SpearmanResult& s) {
  nlohmann::json j{{"rho", s.rho}, {"p_two_sided", s.p_two_sided}};
  if (s.exact) {
    j["p_exact_two_sided"] = s.p_exact_two_sided;
    j["p_exact_less"] = s.p_exact_less;
  }
  return j;
}

}  // namespace

std::string grid_report_json(const GridReport& r) {
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["cap"] = r.cap;
  j["states"] = r.states;
  j["baseline"] = point_json(r.baseline);
  j["points"] = nlohmann::json::array();
  for (const auto& p : r.points) j["points"].push_back(point_json(p));
  j["selected_index"] = r.selected ? nlohmann::json(*r.selected) : nlohmann::json(nullptr);
  j["selected"] = r.selected ? point_json(r.points[*r.selected]) : point_json(r.baseline);
  j["feasible"] = r.feasible;
  j["warning"] = r.warning;
  if (r.lambda_vs_success) j["spearman_lambda_success"] = spearman_json(*r.lambda_vs_success);
  if (r.lambda_vs_median_z) j["spearman_lambda_median_z"] = spearman_json(*r.lambda_vs_median_z);
  return j.dump(2) + "\n";
}

GridReport grid_search(AwareKind kind, const PolicyNet& net, std::span<const Vec64> states,
                       const CalibrationProfile& profile, const AwareConfig& cfg,
                       std::span<const Vec64> targets, int threads) {
  cfg.validate();
  if (states.empty()) throw std::invalid_argument("grid_search: no states");
  if (kind == AwareKind::featmatch && targets.size() != states.size())
    throw std::invalid_argument("grid_search: featmatch needs one target per state");
  if (!profile.t) throw std::logic_error("grid_search: profile has no threshold");

  GridReport report;
  report.kind = kind;
  report.cap = cfg.success_drop_cap;
  report.states = states.size();

  auto run_all = [&](auto&& attack) {
    std::vector<AttackResult> results(states.size());
    parallel_for(states.size(), threads, [&](std::size_t i) { results[i] = attack(i); });
    return results;
  };

  report.baseline = summarize(net, profile, run_all([&](std::size_t i) {
    return carlini_wagner(net, states[i], cfg.base);
  }));
  report.baseline.lr = cfg.base.lr;
  report.baseline.iters = cfg.base.iters;
  report.baseline.kappa = cfg.base.kappa;
  report.baseline.feasible = true;

  const std::vector<double> lambdas = kind == AwareKind::featmatch ? std::vector<double>{0.0} : cfg.grid.lambda;
  const std::vector<double> kappas = kind == AwareKind::featmatch ? std::vector<double>{0.0} : cfg.grid.kappa;
  for (double lr : cfg.grid.lr)
    for (int iters : cfg.grid.iters)
      for (double kappa : kappas)
        for (double lambda : lambdas) {
          AwareConfig point = cfg;
          point.lambda = lambda;
          point.base.lr = lr;
          point.base.iters = iters;
          point.base.kappa = kappa;
          point.fm_step = lr;
          point.fm_iters = iters;
          GridPoint gp = summarize(net, profile, run_all([&](std::size_t i) {
            switch (kind) {
              case AwareKind::so: return so_aware_cw(net, states[i], profile, point);
              case AwareKind::fo: return fo_aware_attack(net, states[i], profile, point);
              case AwareKind::featmatch: return feature_match_attack(net, states[i], targets[i], point);
            }
            throw std::logic_error("grid_search: unhandled kind");
          }));
          gp.lr = lr;
          gp.iters = iters;
          gp.kappa = kappa;
          gp.lambda = lambda;
          gp.feasible = gp.successes > 0 &&
                        gp.success_rate >= (1.0 - cfg.success_drop_cap) * report.baseline.success_rate - 1e-12;
          report.points.push_back(gp);
        }

  for (std::size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    if (!p.feasible) continue;
    if (!report.selected) {
      report.selected = i;
      continue;
    }
    const auto& b = report.points[*report.selected];
    if (p.tpr < b.tpr || (p.tpr == b.tpr && p.median_z < b.median_z)) report.selected = i;
  }
  report.feasible = report.selected.has_value();
  if (!report.feasible) report.warning = "no grid point meets the success-drop cap; baseline returned";

  if (kind != AwareKind::featmatch && report.points.size() >= 3) {
    std::vector<double> lam, succ, medz;
    for (const auto& p : report.points) {
      lam.push_back(p.lambda);
      succ.push_back(p.success_rate);
      if (std::isfinite(p.median_z)) medz.push_back(p.median_z);
    }
    report.lambda_vs_success = stats::spearman(lam, succ);
    if (medz.size() == lam.size()) report.lambda_vs_median_z = stats::spearman(lam, medz);
  }
  return report;
}

AwareConfig selected_config(const GridReport& r, const AwareConfig& cfg) {
  AwareConfig out = cfg;
  const GridPoint& p = r.selected ? r.points[*r.selected] : r.baseline;
  out.lambda = r.selected ? p.lambda : 0.0;
  out.base.lr = p.lr;
  out.base.iters = p.iters;
  out.base.kappa = p.kappa;
  return out;
}

}  // namespace inrd
