#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inrd/attacks.hpp"
#include "inrd/detector.hpp"
#include "inrd/gridworld.hpp"
#include "inrd/policy_net.hpp"

namespace inrd {

enum class Label { base, adversarial };
std::string to_string(Label l);
Label label_from_string(const std::string& name);

/// One scored observation: the unit of ROC evaluation.
struct ScoredState {
  int episode = 0;
  int step = 0;
  Label label = Label::base;
  std::string attack = "none";
  std::optional<bool> success;  // adversarial records only
  double stat = 0.0;            // NaN when the probe is undefined
  double z_abs = 0.0;
  bool flagged = false;
  std::string reason;
  Vec64 obs;                    // the observation that was scored
};

/// Attack applied to every observation of an attacked episode.
struct NamedAttack {
  std::string name;
  std::function<AttackResult(const Vec64& obs)> run;
};
NamedAttack named_attack(const PolicyNet& net, const AttackConfig& cfg);

/// Scores one observation with the profile's statistic.
void score_state(const CostModel& model, const CalibrationProfile& profile, ScoredState& rec);

/// Rescores records in place with another profile (observations are kept on the record).
void rescore(const PolicyNet& net, const CalibrationProfile& profile, std::vector<ScoredState>& records,
             int threads = 1);

/// Base arm: greedy episodes labelled base. Attacked arm per attack: the same episode
/// seeds, with the agent acting on attacked observations; every visited state is perturbed
/// and labelled adversarial. Scoring failures are recorded per state.
std::vector<ScoredState> build_eval_set(const PolicyNet& net, const GridSpec& spec,
                                        const CalibrationProfile& profile,
                                        const std::vector<NamedAttack>& attacks, int episodes,
                                        std::uint64_t seed, int threads = 1);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // flag z ≥ threshold; +∞ for the origin
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Threshold sweep over all distinct scores; positives are the `positive` flags.
RocCurve roc_from_scores(const std::vector<double>& scores, const std::vector<bool>& positive);

/// ROC of adversarial vs base records. With `successful_only`, adversarial records whose
/// attack failed are left out. Throws when either class is empty.
RocCurve roc(const std::vector<ScoredState>& records, bool successful_only = true);

/// P(score_pos > score_neg) + ½P(=) by enumerating all pairs.
double mann_whitney_auc(const std::vector<double>& pos, const std::vector<double>& neg);

/// TPR at the largest achievable FPR ≤ fpr, or linearly interpolated between the
/// bracketing points.
double tpr_at_fpr(const RocCurve& curve, double fpr, bool interpolate = false);

struct Degradation {
  double clean = 0.0;
  double attacked = 0.0;
  double random = 0.0;
  /// (clean − attacked)/(clean − random); NaN when clean equals random.
  double fraction = 0.0;
};

/// Paired greedy rollouts with and without the per-state attack (same episode seeds).
Degradation return_degradation(const PolicyNet& net, const GridSpec& spec, const NamedAttack& attack,
                               int episodes, std::uint64_t seed, int threads = 1);

struct AttackSummary {
  std::string attack;
  std::size_t states = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double mean_stat = 0.0;       // over successful states
  double auc = 0.0;             // NaN when no state succeeded
  double tpr_at_fpr = 0.0;      // ROC-based, conservative
  double tpr_calibrated = 0.0;  // flagged fraction at the profile threshold
};

struct EvalSummary {
  Statistic statistic = Statistic::so;
  double epsilon = 0.0;
  double target_fpr = 0.01;
  std::size_t base_states = 0;
  double mean_stat_base = 0.0;
  double realized_fpr = 0.0;
  std::size_t fpr_ci_lo = 0;  // 95% acceptance interval on the false-positive count
  std::size_t fpr_ci_hi = 0;
  std::vector<AttackSummary> attacks;  // in first-appearance order
};

EvalSummary summarize_eval(const std::vector<ScoredState>& records, const CalibrationProfile& profile,
                           double target_fpr = 0.01);

}  // namespace inrd
