#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "inrd/agent.hpp"
#include "inrd/evaluation.hpp"
#include "inrd/report.hpp"
#include "inrd/stats.hpp"

using namespace inrd;
using namespace testing;

namespace {

CalibrationProfile unit_profile(Statistic stat = Statistic::so) {
  CalibrationProfile p;
  p.statistic = stat;
  p.mean = 0.0;
  p.std = 1.0;
  p.n = 100;
  p.t = 3.0;
  return p;
}

std::vector<ScoredState> records_from(const std::vector<double>& base, const std::vector<double>& adv) {
  std::vector<ScoredState> out;
  for (double z : base) {
    ScoredState r;
    r.z_abs = z;
    out.push_back(r);
  }
  for (double z : adv) {
    ScoredState r;
    r.label = Label::adversarial;
    r.attack = "cw";
    r.success = true;
    r.z_abs = z;
    out.push_back(r);
  }
  return out;
}

// Largest TPR over all thresholds "flag z ≥ t" whose FPR does not exceed the target.
double brute_tpr(const std::vector<double>& neg, const std::vector<double>& pos, double fpr) {
  std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  thresholds.insert(thresholds.end(), pos.begin(), pos.end());
  double best = 0.0;
  for (double t : thresholds) {
    const double f = std::count_if(neg.begin(), neg.end(), [&](double v) { return v >= t; }) / double(neg.size());
    const double p = std::count_if(pos.begin(), pos.end(), [&](double v) { return v >= t; }) / double(pos.size());
    if (f <= fpr + 1e-12) best = std::max(best, p);
  }
  return best;
}

PolicyNet small_agent() { return PolicyNet::random({192, 16, 4}, Activation::relu, 31); }

}  // namespace

TEST_CASE("perfect separation gives AUC 1 and TPR 1") {
  const auto curve = roc(records_from({0.0, 1.0}, {2.0, 3.0}));
  CHECK(curve.auc == 1.0);
  CHECK(tpr_at_fpr(curve, 0.01) == 1.0);
  CHECK(tpr_at_fpr(curve, 1.0) == 1.0);
  CHECK(curve.points.front().fpr == 0.0);
  CHECK(curve.points.back().fpr == 1.0);
  CHECK(curve.points.back().tpr == 1.0);
}

TEST_CASE("ROC needs both classes") {
  CHECK_THROWS_AS(roc(records_from({0.0, 1.0}, {})), std::invalid_argument);
  CHECK_THROWS_AS(roc(records_from({}, {1.0})), std::invalid_argument);
}

TEST_CASE("failed attacks are excluded unless requested") {
  auto recs = records_from({0.0, 1.0, 2.0}, {5.0});
  ScoredState failed;
  failed.label = Label::adversarial;
  failed.attack = "cw";
  failed.success = false;
  failed.z_abs = 0.5;
  recs.push_back(failed);
  CHECK(roc(recs).positives == 1);
  CHECK(roc(recs, false).positives == 2);
}

TEST_CASE("AUC equals the Mann-Whitney pair count") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> grid(0, 6);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> neg(5 + k % 7), pos(3 + k % 5);
    for (double& v : neg) v = grid(rng) * 0.5;
    for (double& v : pos) v = grid(rng) * 0.5 + 0.25 * (k % 2);
    double pairs = 0.0;
    for (double p : pos)
      for (double n : neg) pairs += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
    const double want = pairs / (pos.size() * neg.size());
    CHECK(roc(records_from(neg, pos)).auc == doctest::Approx(want).epsilon(1e-15));
    CHECK(mann_whitney_auc(pos, neg) == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("coin-flip labels give AUC near one half") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> scores(10000);
  std::vector<bool> positive(10000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = std::abs(g(rng));
    positive[i] = coin(rng);
  }
  const double auc = roc_from_scores(scores, positive).auc;
  CHECK(auc >= 0.47);
  CHECK(auc <= 0.53);
}

TEST_CASE("tpr_at_fpr matches a brute-force threshold sweep") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int k = 0; k < 10; ++k) {
    std::vector<double> neg(10), pos(10);
    for (double& v : neg) v = std::round(std::abs(g(rng)) * 4.0) / 4.0;
    for (double& v : pos) v = std::round(std::abs(g(rng) + 1.0) * 4.0) / 4.0;
    const auto curve = roc(records_from(neg, pos));
    for (double f : {0.0, 0.01, 0.1, 0.25, 0.5, 1.0}) CHECK(tpr_at_fpr(curve, f) == doctest::Approx(brute_tpr(neg, pos, f)));
  }
}

TEST_CASE("interpolated TPR lies between the bracketing points") {
  const auto curve = roc(records_from({0.0, 1.0, 2.0, 3.0}, {1.5, 2.5, 3.5, 4.5}));
  const double lo = tpr_at_fpr(curve, 0.3), hi = tpr_at_fpr(curve, 0.5);
  const double mid = tpr_at_fpr(curve, 0.3, true);
  CHECK(mid >= lo);
  CHECK(mid <= hi);
  CHECK(tpr_at_fpr(curve, 0.25, true) == tpr_at_fpr(curve, 0.25));
}

TEST_CASE("a base-only evaluation labels every record base") {
  const PolicyNet net = small_agent();
  const auto recs = build_eval_set(net, GridSpec{}, unit_profile(), {}, 1, 4);
  REQUIRE_FALSE(recs.empty());
  for (const auto& r : recs) CHECK(r.label == Label::base);
}

TEST_CASE("a zero-budget attack leaves the score distribution unchanged") {
  const PolicyNet net = small_agent();
  const NetCost model(net);
  AttackConfig cfg = default_attack_config(AttackMethod::fgsm);
  cfg.epsilon = 0.0;
  const GridSpec spec;
  const auto recs = build_eval_set(net, spec, unit_profile(), {named_attack(net, cfg)}, 3, 7, 2);

  std::vector<double> base, adv;
  std::size_t expected = 0;
  for (int e = 0; e < 3; ++e)
    expected += run_episode(GridWorld(spec), episode_seed(7, static_cast<std::size_t>(e)), [&](const Vec64& o, int) {
                  return static_cast<int>(greedy_action(net, o));
                }).observations.size();
  for (const auto& r : recs) (r.label == Label::base ? base : adv).push_back(r.stat);
  CHECK(recs.size() == 2 * expected);
  CHECK(base.size() == expected);
  CHECK(stats::ks_two_sample(base, adv).p > 0.01);
}

TEST_CASE("evaluation output does not depend on the thread count") {
  const PolicyNet net = small_agent();
  AttackConfig cfg = default_attack_config(AttackMethod::ifgsm);
  const std::vector<NamedAttack> attacks{named_attack(net, cfg)};
  const auto a = build_eval_set(net, GridSpec{}, unit_profile(Statistic::fo), attacks, 2, 5, 1);
  const auto b = build_eval_set(net, GridSpec{}, unit_profile(Statistic::fo), attacks, 2, 5, 4);
  CHECK(results_csv(a) == results_csv(b));
}

TEST_CASE("return degradation with a zero-budget attack") {
  const PolicyNet net = small_agent();
  AttackConfig cfg = default_attack_config(AttackMethod::fgsm);
  cfg.epsilon = 0.0;
  const auto d = return_degradation(net, GridSpec{}, named_attack(net, cfg), 4, 3);
  CHECK(d.clean == d.attacked);
  if (d.clean != d.random) {
    CHECK(d.fraction == 0.0);
  } else {
    CHECK(std::isnan(d.fraction));
  }
  CHECK(d.random == evaluate_random(GridSpec{}, 4, 3));
}

TEST_CASE("results CSV: header only, one row per record, parse round trip") {
  CHECK(results_csv({}) == std::string(kResultsCsvHeader) + "\n");
  auto recs = records_from({0.5, 1.25}, {3.0});
  recs[0].stat = -0.125;
  recs[2].stat = 0.75;
  recs[2].flagged = true;
  recs[1].episode = 2;
  recs[1].step = 9;
  const std::string csv = results_csv(recs);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto back = parse_results_csv(csv);
  REQUIRE(back.size() == 3);
  CHECK(back[1].episode == 2);
  CHECK(back[1].step == 9);
  CHECK(back[2].label == Label::adversarial);
  CHECK(back[2].success == std::optional<bool>(true));
  CHECK(back[2].flagged);
  CHECK(back[0].stat == -0.125);
  CHECK(results_csv(back) == csv);
}

TEST_CASE("report emission is byte-identical on re-emit") {
  const PolicyNet net = small_agent();
  const auto profile = unit_profile();
  const std::vector<NamedAttack> attacks{named_attack(net, default_attack_config(AttackMethod::fgsm))};
  const auto recs = build_eval_set(net, GridSpec{}, profile, attacks, 2, 11);
  const auto summary = summarize_eval(recs, profile);
  const auto dir = std::filesystem::temp_directory_path() / "inrd_report_test";
  std::filesystem::remove_all(dir);
  emit_report(recs, summary, dir / "a");
  emit_report(recs, summary, dir / "b");
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const auto other = dir / "b" / entry.path().filename();
    REQUIRE(std::filesystem::exists(other));
    std::ifstream fa(entry.path(), std::ios::binary), fb(other, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    ++files;
  }
  CHECK(files >= 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary counts successes and realised FPR") {
  auto recs = records_from({0.0, 4.0, 1.0, 2.0}, {5.0, 6.0});
  recs[1].flagged = true;
  recs[4].flagged = true;
  recs[5].success = false;
  const auto s = summarize_eval(recs, unit_profile(), 0.25);
  CHECK(s.base_states == 4);
  CHECK(s.realized_fpr == 0.25);
  REQUIRE(s.attacks.size() == 1);
  CHECK(s.attacks[0].states == 2);
  CHECK(s.attacks[0].successes == 1);
  CHECK(s.attacks[0].tpr_calibrated == 1.0);
  CHECK(s.attacks[0].auc == 1.0);
}
