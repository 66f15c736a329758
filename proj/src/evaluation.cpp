#include "inrd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "inrd/agent.hpp"
#include "inrd/parallel.hpp"
#include "inrd/stats.hpp"

namespace inrd {

std::string to_string(Label l) { return l == Label::base ? "base" : "adversarial"; }

Label label_from_string(const std::string& name) {
  if (name == "base") return Label::base;
  if (name == "adversarial") return Label::adversarial;
  throw std::invalid_argument("unknown label '" + name + "'");
}

NamedAttack named_attack(const PolicyNet& net, const AttackConfig& cfg) {
  cfg.validate();
  return {to_string(cfg.method), [&net, cfg](const Vec64& obs) { return run_attack(net, obs, cfg); }};
}

void score_state(const CostModel& model, const CalibrationProfile& profile, ScoredState& rec) {
  const Detection d = detect(model, rec.obs, profile);
  rec.stat = d.stat_value;
  rec.z_abs = d.z_abs;
  rec.flagged = d.flagged;
  rec.reason = d.reason;
}

void rescore(const PolicyNet& net, const CalibrationProfile& profile, std::vector<ScoredState>& records,
             int threads) {
  const NetCost model(net);
  parallel_for(records.size(), threads, [&](std::size_t i) { score_state(model, profile, records[i]); });
}

std::vector<ScoredState> build_eval_set(const PolicyNet& net, const GridSpec& spec,
                                        const CalibrationProfile& profile,
                                        const std::vector<NamedAttack>& attacks, int episodes,
                                        std::uint64_t seed, int threads) {
  if (episodes < 0) throw std::invalid_argument("build_eval_set: episodes must be >= 0");
  const GridWorld world(spec);
  const auto n_ep = static_cast<std::size_t>(episodes);
  // arm 0 is the base arm, arm k > 0 runs attacks[k-1]
  const std::size_t arms = attacks.size() + 1;
  std::vector<std::vector<ScoredState>> per_episode(arms * n_ep);

  parallel_for(arms * n_ep, threads, [&](std::size_t job) {
    const std::size_t arm = job / n_ep, e = job % n_ep;
    auto& out = per_episode[job];
    const auto ep_seed = episode_seed(seed, e);
    if (arm == 0) {
      const auto log = run_episode(world, ep_seed, [&](const Vec64& o, int) {
        return static_cast<int>(greedy_action(net, o));
      });
      for (std::size_t k = 0; k < log.observations.size(); ++k) {
        ScoredState r;
        r.episode = static_cast<int>(e);
        r.step = static_cast<int>(k);
        r.obs = log.observations[k];
        out.push_back(std::move(r));
      }
      return;
    }
    const NamedAttack& attack = attacks[arm - 1];
    run_episode(world, ep_seed, [&](const Vec64& o, int step) {
      AttackResult res = attack.run(o);
      ScoredState r;
      r.episode = static_cast<int>(e);
      r.step = step;
      r.label = Label::adversarial;
      r.attack = attack.name;
      r.success = res.success;
      r.obs = std::move(res.s_adv);
      const int action = static_cast<int>(greedy_action(net, r.obs));
      out.push_back(std::move(r));
      return action;
    });
  });

  std::vector<ScoredState> records;
  for (auto& chunk : per_episode)
    for (auto& r : chunk) records.push_back(std::move(r));
  rescore(net, profile, records, threads);
  return records;
}

RocCurve roc_from_scores(const std::vector<double>& scores, const std::vector<bool>& positive) {
  require_same_size(scores.size(), positive.size(), "roc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores)
    if (std::isnan(s)) throw std::invalid_argument("roc: NaN score");
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve curve;
  for (bool p : positive) (p ? curve.positives : curve.negatives)++;
  if (curve.positives == 0 || curve.negatives == 0)
    throw std::invalid_argument("roc: both classes must be present (positives=" +
                                std::to_string(curve.positives) + ", negatives=" +
                                std::to_string(curve.negatives) + ")");
  const double np = static_cast<double>(curve.positives), nn = static_cast<double>(curve.negatives);

  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area in count units; trapezoids over integer counts equal the
  // Mann-Whitney pair count exactly.
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == thr; ++i) (positive[order[i]] ? tp : fp)++;
    area2 += (fp - fp0) * (tp + tp0);
    curve.points.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np, thr});
  }
  curve.auc = static_cast<double>(area2) / (2.0 * np * nn);
  return curve;
}

RocCurve roc(const std::vector<ScoredState>& records, bool successful_only) {
  std::vector<double> scores;
  std::vector<bool> positive;
  for (const auto& r : records) {
    if (r.label == Label::adversarial && successful_only && !r.success.value_or(false)) continue;
    scores.push_back(r.z_abs);
    positive.push_back(r.label == Label::adversarial);
  }
  return roc_from_scores(scores, positive);
}

double mann_whitney_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("mann_whitney_auc: empty class");
  std::uint64_t twice = 0;
  for (double p : pos)
    for (double n : neg) twice += p > n ? 2 : (p == n ? 1 : 0);
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double tpr_at_fpr(const RocCurve& curve, double fpr, bool interpolate) {
  if (curve.points.empty()) throw std::invalid_argument("tpr_at_fpr: empty curve");
  constexpr double tol = 1e-12;
  double best = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    if (p.fpr <= fpr + tol) {
      best = std::max(best, p.tpr);
      continue;
    }
    if (interpolate && i > 0) {
      const auto& q = curve.points[i - 1];
      const double w = (fpr - q.fpr) / (p.fpr - q.fpr);
      best = std::max(best, q.tpr + w * (p.tpr - q.tpr));
    }
    break;
  }
  return best;
}

Degradation return_degradation(const PolicyNet& net, const GridSpec& spec, const NamedAttack& attack,
                               int episodes, std::uint64_t seed, int threads) {
  if (episodes < 1) throw std::invalid_argument("return_degradation: episodes must be >= 1");
  const GridWorld world(spec);
  const auto n = static_cast<std::size_t>(episodes);
  std::vector<double> clean(n), attacked(n);
  parallel_for(2 * n, threads, [&](std::size_t job) {
    const std::size_t e = job % n;
    const auto ep_seed = episode_seed(seed, e);
    if (job < n) {
      clean[e] = run_episode(world, ep_seed, [&](const Vec64& o, int) {
                   return static_cast<int>(greedy_action(net, o));
                 }).total_return;
    } else {
      attacked[e] = run_episode(world, ep_seed, [&](const Vec64& o, int) {
                      return static_cast<int>(greedy_action(net, attack.run(o).s_adv));
                    }).total_return;
    }
  });
  Degradation d;
  d.clean = stats::mean(clean);
  d.attacked = stats::mean(attacked);
  d.random = evaluate_random(spec, episodes, seed);
  const double span = d.clean - d.random;
  d.fraction = span != 0.0 ? (d.clean - d.attacked) / span : std::numeric_limits<double>::quiet_NaN();
  return d;
}

EvalSummary summarize_eval(const std::vector<ScoredState>& records, const CalibrationProfile& profile,
                           double target_fpr) {
  EvalSummary s;
  s.statistic = profile.statistic;
  s.epsilon = profile.epsilon;
  s.target_fpr = target_fpr;

  std::vector<double> base_z, base_stat;
  std::size_t base_flagged = 0;
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (r.label == Label::base) {
      base_z.push_back(r.z_abs);
      if (std::isfinite(r.stat)) base_stat.push_back(r.stat);
      if (r.flagged) ++base_flagged;
    } else if (std::find(names.begin(), names.end(), r.attack) == names.end()) {
      names.push_back(r.attack);
    }
  }
  s.base_states = base_z.size();
  if (!base_stat.empty()) s.mean_stat_base = stats::mean(base_stat);
  if (s.base_states > 0) {
    s.realized_fpr = static_cast<double>(base_flagged) / static_cast<double>(s.base_states);
    const auto ci = stats::binomial_acceptance(s.base_states, target_fpr);
    s.fpr_ci_lo = ci.lo;
    s.fpr_ci_hi = ci.hi;
  }

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& name : names) {
    AttackSummary a;
    a.attack = name;
    std::vector<double> pos, stat;
    std::size_t flagged = 0;
    for (const auto& r : records) {
      if (r.label != Label::adversarial || r.attack != name) continue;
      ++a.states;
      if (!r.success.value_or(false)) continue;
      ++a.successes;
      pos.push_back(r.z_abs);
      if (std::isfinite(r.stat)) stat.push_back(r.stat);
      if (r.flagged) ++flagged;
    }
    a.success_rate = a.states ? static_cast<double>(a.successes) / static_cast<double>(a.states) : 0.0;
    a.mean_stat = stat.empty() ? nan : stats::mean(stat);
    if (!pos.empty() && !base_z.empty()) {
      std::vector<double> scores = base_z;
      std::vector<bool> positive(base_z.size(), false);
      scores.insert(scores.end(), pos.begin(), pos.end());
      positive.insert(positive.end(), pos.size(), true);
      const RocCurve curve = roc_from_scores(scores, positive);
      a.auc = curve.auc;
      a.tpr_at_fpr = tpr_at_fpr(curve, target_fpr);
      a.tpr_calibrated = static_cast<double>(flagged) / static_cast<double>(pos.size());
    } else {
      a.auc = a.tpr_at_fpr = a.tpr_calibrated = nan;
    }
    s.attacks.push_back(a);
  }
  return s;
}

}  // namespace inrd
