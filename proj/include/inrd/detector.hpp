#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "inrd/cost.hpp"
#include "inrd/linalg.hpp"

namespace inrd {

/// ‖∇_s J‖₂ below which the probe direction is undefined.
inline constexpr double kDegenerateGradientNorm = 1e-12;
inline constexpr double kDefaultProbeEpsilon = 1e-2;

struct DegenerateGradient : std::runtime_error {
  DegenerateGradient() : std::runtime_error("DegenerateGradient: ‖∇J‖₂ < 1e-12, state cannot be probed") {}
};

struct DegenerateCalibration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Statistic { fo, so };
std::string to_string(Statistic s);
Statistic statistic_from_string(const std::string& name);

/// ε·sign(g)/‖g‖₂ for a given gradient g. Throws DegenerateGradient.
Vec64 probe_from_gradient(ConstVecView gradient, double epsilon);

/// η(s₀) = ε·sign(∇J(s₀, π*))/‖∇J(s₀, π*)‖₂.
Vec64 probe_direction(const CostModel& model, ConstVecView s0, double epsilon);

/// Second-order statistic L(s₀, η) = J(s₀+η, π*(·|s₀)) − [J(s₀, π*(·|s₀)) + ∇J·η]
/// along the sign-gradient probe. Costs one gradient and two cost evaluations.
double so_stat(const CostModel& model, ConstVecView s0, double epsilon);

/// Gaussian probe η ~ N(0, εI) (per-coordinate variance ε) from a seeded stream.
Vec64 fo_noise(std::size_t dim, double epsilon, std::uint64_t seed);

/// K(s₀, η) = J(s₀+η, π*(·|s₀)) − J(s₀, π*(·|s₀)) for a given probe η.
double fo_stat_with_noise(const CostModel& model, ConstVecView s0, ConstVecView eta);

/// K with one noise draw from the stream seeded by `seed`.
double fo_stat(const CostModel& model, ConstVecView s0, double epsilon, std::uint64_t seed);

/// Seed of the first-order noise draw for an observation: a pure function of the
/// profile seed and the observation's bits, so detection is order independent.
std::uint64_t observation_noise_seed(std::uint64_t profile_seed, ConstVecView s);

struct CalibrationProfile {
  Statistic statistic = Statistic::so;
  double epsilon = kDefaultProbeEpsilon;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
  /// Threshold in standard deviations; unset until choose_threshold.
  std::optional<double> t;
  std::optional<double> target_fpr;
  std::uint64_t seed = 0;
  std::size_t skipped_degenerate = 0;
  /// Flag only values above the mean (ablation of the |·| rule).
  bool one_sided = false;
};

std::string profile_json(const CalibrationProfile& p);
CalibrationProfile profile_from_json(const std::string& text);
void save_profile(const CalibrationProfile& p, const std::filesystem::path& path);
CalibrationProfile load_profile(const std::filesystem::path& path);

/// The profile's statistic at one state. Throws DegenerateGradient for SO at flat states.
double statistic_value(const CostModel& model, ConstVecView s, Statistic stat, double epsilon,
                       std::uint64_t seed);

struct CalibrationRun {
  CalibrationProfile profile;
  /// Statistic of every usable state, in input order.
  std::vector<double> values;
};

/// Mean and unbiased standard deviation of the statistic over base states. Degenerate
/// states are skipped and counted. Throws DegenerateCalibration when fewer than two
/// states remain or the standard deviation is zero.
CalibrationRun calibrate(const CostModel& model, std::span<const Vec64> base_obs, double epsilon,
                         Statistic statistic, std::uint64_t seed, int threads = 1);

/// Profile from precomputed statistic values (same rules as calibrate).
CalibrationProfile profile_from_values(std::span<const double> values, Statistic statistic,
                                       double epsilon, std::uint64_t seed, std::size_t skipped = 0);

/// Score used by the threshold rule: |v − mean|/std, or (v − mean)/std when one-sided.
double z_score(const CalibrationProfile& p, double value);

/// Lower-interpolated (1 − target_fpr) quantile of the calibration z-scores.
/// Throws if target_fpr ∉ (0,1) or target_fpr < 1/n.
double choose_threshold(const CalibrationProfile& profile, std::span<const double> values,
                        double target_fpr);

struct Detection {
  double stat_value = 0.0;  // NaN when the probe is undefined
  double z_abs = 0.0;
  bool flagged = false;
  std::string reason;       // "degenerate_gradient" when the probe is undefined
};

/// Threshold rule on an already computed statistic value.
Detection detect_value(const CalibrationProfile& profile, double value);

/// Algorithm: compute the profile's statistic at s and flag |z| > t.
/// Requires profile.t. States with a degenerate gradient are flagged.
Detection detect(const CostModel& model, ConstVecView s, const CalibrationProfile& profile);

struct Prop1Budget {
  int max_iters = 200000;
  double grad_tol = 1e-6;
  double hessian_step = 1e-3;
};

struct Prop1Report {
  bool converged = false;
  int iterations = 0;
  Vec64 s_star;
  double objective = 0.0;
  double lambda_min = 0.0;
  /// λ_min + c; nonnegative at a local minimum of J + (c/2)‖s − s₀‖².
  double margin = 0.0;
  /// ‖∇J(s*, τ) + c(s* − s₀)‖₂
  double gradient_residual = 0.0;
};

/// Minimises f(s) = J(s,τ) + (c/2)‖s − s₀‖² by backtracking gradient descent, then
/// measures the smallest eigenvalue of the finite-difference Hessian of J at s*.
Prop1Report verify_prop1(const CostModel& model, ConstVecView s0, const ActionDist& tau, double c,
                         const Prop1Budget& budget = {});

}  // namespace inrd
