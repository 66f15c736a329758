#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inrd/cost.hpp"
#include "inrd/linalg.hpp"
#include "inrd/policy_net.hpp"

namespace inrd {

enum class AttackMethod { fgsm, ifgsm, mifgsm, nesterov, deepfool, cw, ead };

std::string to_string(AttackMethod m);
AttackMethod attack_method_from_string(const std::string& name);
const std::vector<AttackMethod>& all_attack_methods();

struct AttackConfig {
  AttackMethod method = AttackMethod::fgsm;
  double epsilon = 0.05;     // ℓ∞ budget of the FGSM family
  double alpha_step = 0.01;  // per-iteration step of the FGSM family
  int iters = 10;
  double mu = 1.0;           // momentum decay
  double overshoot = 0.02;   // DeepFool
  double c = 1.0;            // C&W / EAD loss weight
  double kappa = 0.0;        // C&W / EAD confidence
  double lr = 0.01;          // C&W / EAD step size
  double lambda1 = 0.01;     // EAD ℓ1 weight
  double lambda2 = 1.0;      // EAD ℓ2² weight
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  /// Targeted mode: drive the policy to this action.
  std::optional<std::size_t> target;
  /// Action the attack tries to move away from; defaults to the greedy action at s̄.
  std::optional<std::size_t> original_action;

  void validate() const;
};

/// Per-method desk-scale defaults.
AttackConfig default_attack_config(AttackMethod m);

std::string attack_config_json(const AttackConfig& cfg);
/// Fields absent from the JSON keep the method's defaults.
AttackConfig attack_config_from_json(const std::string& text, std::optional<AttackMethod> method = {});

struct AttackResult {
  Vec64 s_adv;
  double linf = 0.0;
  double l2 = 0.0;
  double l1 = 0.0;
  bool success = false;
  int iters_used = 0;
  AttackMethod method = AttackMethod::fgsm;
};

/// Fills norms of s_adv − s̄.
AttackResult make_result(const Vec64& s_bar, Vec64 s_adv, bool success, int iters, AttackMethod m);

// Sign-gradient family. Untargeted runs ascend J(s, π*(·|s̄)); targeted runs descend J(s, e_t).
AttackResult fgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg);
AttackResult ifgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg);
AttackResult mifgsm(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg);
AttackResult nesterov(const CostModel& model, ConstVecView s_bar, const AttackConfig& cfg);

/// Multiclass DeepFool on logits.
AttackResult deepfool(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg);

/// Extra term added to the C&W objective: returns its value and accumulates ∇_s into `grad`.
using CwPenalty = std::function<double(const Vec64& s, Vec64& grad, int iteration)>;
/// Ranks successful iterates; lower is better. Receives the penalty value at s (0 without one).
using CwScore = std::function<double(const Vec64& s, double penalty_value)>;

/// Per-iteration record of the C&W optimiser.
struct CwTrace {
  std::vector<Vec64> iterates;
  std::vector<double> penalty_values;
  std::vector<double> objective_values;
};

struct CwHooks {
  CwPenalty penalty;
  CwScore score;
  CwTrace* trace = nullptr;
};

/// C&W ℓ2 with s = (tanh(w)+1)/2 and Adam on w. Loss c·max(margin, −κ) + ‖s − s̄‖²₂
/// (+ penalty). Returns the best successful iterate (lowest ℓ2 unless hooks.score is set),
/// or s̄ with success=false.
AttackResult carlini_wagner(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg,
                            const CwHooks& hooks = {});

/// Elastic-net attack by ISTA on c·J + λ₁‖δ‖₁ + λ₂‖δ‖²₂ with projection to the box.
/// Returns the successful iterate with the lowest λ₁‖δ‖₁ + λ₂‖δ‖²₂.
AttackResult ead(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg,
                 CwTrace* trace = nullptr);

/// Logit margin used by C&W/EAD: z_orig − max_{a≠orig} z_a (untargeted) or
/// max_{a≠t} z_a − z_t (targeted). Success requires margin ≤ −κ and a changed argmax.
double attack_margin(ConstVecView logits, std::size_t original, std::optional<std::size_t> target);

/// Dispatches on cfg.method.
AttackResult run_attack(const PolicyNet& net, ConstVecView s_bar, const AttackConfig& cfg);

}  // namespace inrd
