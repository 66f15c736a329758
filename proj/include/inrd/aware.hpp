#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inrd/attacks.hpp"
#include "inrd/detector.hpp"
#include "inrd/policy_net.hpp"
#include "inrd/stats.hpp"

namespace inrd {

enum class AwareKind { so, fo, featmatch };
std::string to_string(AwareKind k);
AwareKind aware_kind_from_string(const std::string& name);

/// How the SO penalty is differentiated.
///  bpda:    forward uses the sign probe, backward the straight-through surrogate.
///  no_sign: forward and backward both use the smooth probe (ablation).
enum class SoPenaltyMode { bpda, no_sign };

struct AwareGrid {
  std::vector<double> lr{0.01};
  std::vector<int> iters{200};
  std::vector<double> kappa{0.0};
  std::vector<double> lambda{0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
};

struct AwareConfig {
  AttackConfig base = default_attack_config(AttackMethod::cw);
  double lambda = 1.0;
  SoPenaltyMode mode = SoPenaltyMode::bpda;
  int eot_samples = 50;
  double success_drop_cap = 0.10;
  /// Step of the finite-difference Hessian-vector products in the SO penalty gradient.
  double hvp_step = 1e-4;
  std::uint64_t seed = 0;
  // Feature matching: ℓ∞ budget, PGD iterations and initial step (halved on failure).
  double fm_epsilon = 0.05;
  int fm_iters = 1000;
  double fm_step = 0.01;
  double fm_min_step = 1e-6;
  AwareGrid grid;

  void validate() const;
};

std::string aware_config_json(const AwareConfig& cfg);
AwareConfig aware_config_from_json(const std::string& text);

/// Value of the SO penalty term and its (surrogate) gradient at s.
struct PenaltyEval {
  double value = 0.0;  // L(s) with the sign probe (no_sign: with the smooth probe)
  Vec64 grad;          // ∇L̃(s)
  bool degenerate = false;
};

/// Smooth probe ε·g/(‖g‖₂‖g‖∞) used by the backward pass.
Vec64 surrogate_probe(ConstVecView g, double epsilon);

/// L at s along the surrogate probe (the function whose exact gradient so_penalty returns).
double so_stat_surrogate(const PolicyNet& net, ConstVecView s, double epsilon);

/// SO penalty at s with the greedy action at s held fixed.
PenaltyEval so_penalty(const PolicyNet& net, ConstVecView s, double epsilon, SoPenaltyMode mode,
                       double hvp_step = 1e-4);

/// Empirical mean of K over `samples` probe draws from the stream seeded by `seed`,
/// with its gradient mean(∇J(s+η) − ∇J(s)).
PenaltyEval eot_penalty(const PolicyNet& net, ConstVecView s, double epsilon, int samples,
                        std::uint64_t seed);

/// PGD on ‖z(s) − z(target)‖²₂ inside the ℓ∞ ball of radius fm_epsilon and the box.
/// Returns the iterate with the lowest logit distance.
AttackResult feature_match_attack(const PolicyNet& net, ConstVecView s_bar, ConstVecView target_state,
                                  const AwareConfig& cfg);

/// Nearest candidate (ℓ₂) whose greedy action differs from that at s̄.
/// Throws when no candidate qualifies.
const Vec64& choose_feature_target(const PolicyNet& net, ConstVecView s_bar,
                                   std::span<const Vec64> candidates);

/// C&W with λ·L(s_adv) added; successful iterates are ranked by detection z-score.
AttackResult so_aware_cw(const PolicyNet& net, ConstVecView s_bar, const CalibrationProfile& profile,
                         const AwareConfig& cfg, CwTrace* trace = nullptr);

/// C&W with λ·mean K(s_adv) over eot_samples draws per iteration; the draws of
/// iteration i come from derive_seed(cfg.seed, {i}).
AttackResult fo_aware_attack(const PolicyNet& net, ConstVecView s_bar, const CalibrationProfile& profile,
                             const AwareConfig& cfg, CwTrace* trace = nullptr);

struct GridPoint {
  double lr = 0.0;
  int iters = 0;
  double kappa = 0.0;
  double lambda = 0.0;
  double success_rate = 0.0;
  double tpr = 0.0;  // flagged fraction of successful adversarial states
  double median_z = 0.0;
  std::size_t successes = 0;
  bool feasible = false;
};

struct GridReport {
  AwareKind kind = AwareKind::so;
  double cap = 0.10;
  GridPoint baseline;  // unpenalised C&W at the base config
  std::vector<GridPoint> points;
  std::optional<std::size_t> selected;  // index into points
  bool feasible = false;
  std::string warning;
  std::size_t states = 0;
  /// Rank correlations across the λ grid (so/fo with at least 3 points).
  std::optional<stats::SpearmanResult> lambda_vs_success;
  std::optional<stats::SpearmanResult> lambda_vs_median_z;
};

std::string grid_report_json(const GridReport& r);

/// Evaluates every grid point on `states` and selects the lowest-TPR point whose success
/// rate is at least (1 − cap) times the baseline's. `targets` is required for featmatch.
GridReport grid_search(AwareKind kind, const PolicyNet& net, std::span<const Vec64> states,
                       const CalibrationProfile& profile, const AwareConfig& cfg,
                       std::span<const Vec64> targets = {}, int threads = 1);

/// The selected configuration (the base config with the chosen point's values).
AwareConfig selected_config(const GridReport& r, const AwareConfig& cfg);

}  // namespace inrd
