#include "inrd/detector.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "inrd/finite_diff.hpp"
#include "inrd/io.hpp"
#include "inrd/parallel.hpp"
#include "inrd/seeding.hpp"

namespace inrd {

std::string to_string(Statistic s) { return s == Statistic::so ? "so" : "fo"; }

Statistic statistic_from_string(const std::string& name) {
  if (name == "so" || name == "SO") return Statistic::so;
  if (name == "fo" || name == "FO") return Statistic::fo;
  throw std::invalid_argument("unknown statistic '" + name + "' (expected so|fo)");
}

Vec64 probe_from_gradient(ConstVecView gradient, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("probe: epsilon must be positive");
  const double gn = norm_l2(gradient);
  if (!(gn >= kDegenerateGradientNorm)) throw DegenerateGradient();
  Vec64 eta(gradient.size());
  for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = epsilon * sign(gradient[i]) / gn;
  return eta;
}

Vec64 probe_direction(const CostModel& model, ConstVecView s0, double epsilon) {
  const auto greedy = argmax_policy(model, s0);
  return probe_from_gradient(model.cost_gradient(s0, greedy), epsilon);
}

double so_stat(const CostModel& model, ConstVecView s0, double epsilon) {
  const SelfCost base = model.self_cost(s0);
  const auto greedy = ActionDist::one_hot(model.num_actions(), base.action);
  const Vec64 g = model.cost_gradient(s0, greedy);
  const Vec64 eta = probe_from_gradient(g, epsilon);
  const double taylor = base.value + dot(g, eta);
  return model.cost(add(s0, eta), greedy) - taylor;
}

Vec64 fo_noise(std::size_t dim, double epsilon, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("fo_noise: epsilon must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(epsilon));
  Vec64 eta(dim);
  for (double& v : eta) v = normal(rng);
  return eta;
}

double fo_stat_with_noise(const CostModel& model, ConstVecView s0, ConstVecView eta) {
  const SelfCost base = model.self_cost(s0);
  const auto greedy = ActionDist::one_hot(model.num_actions(), base.action);
  return model.cost(add(s0, eta), greedy) - base.value;
}

double fo_stat(const CostModel& model, ConstVecView s0, double epsilon, std::uint64_t seed) {
  return fo_stat_with_noise(model, s0, fo_noise(s0.size(), epsilon, seed));
}

std::uint64_t observation_noise_seed(std::uint64_t profile_seed, ConstVecView s) {
  std::uint64_t h = splitmix64(profile_seed ^ 0xF0F0F0F0ULL);
  for (double v : s) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

double statistic_value(const CostModel& model, ConstVecView s, Statistic stat, double epsilon,
                       std::uint64_t seed) {
  if (stat == Statistic::so) return so_stat(model, s, epsilon);
  return fo_stat(model, s, epsilon, observation_noise_seed(seed, s));
}

std::string profile_json(const CalibrationProfile& p) {
  nlohmann::json j;
  j["statistic"] = to_string(p.statistic);
  j["epsilon"] = p.epsilon;
  j["mean"] = p.mean;
  j["std"] = p.std;
  j["n"] = p.n;
  j["t"] = p.t ? nlohmann::json(*p.t) : nlohmann::json(nullptr);
  j["target_fpr"] = p.target_fpr ? nlohmann::json(*p.target_fpr) : nlohmann::json(nullptr);
  j["seed"] = p.seed;
  j["skipped_degenerate"] = p.skipped_degenerate;
  j["one_sided"] = p.one_sided;
  return j.dump(2) + "\n";
}

CalibrationProfile profile_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CalibrationProfile p;
  p.statistic = statistic_from_string(j.at("statistic").get<std::string>());
  p.epsilon = j.at("epsilon").get<double>();
  p.mean = j.at("mean").get<double>();
  p.std = j.at("std").get<double>();
  p.n = j.at("n").get<std::size_t>();
  if (j.contains("t") && !j["t"].is_null()) p.t = j["t"].get<double>();
  if (j.contains("target_fpr") && !j["target_fpr"].is_null()) p.target_fpr = j["target_fpr"].get<double>();
  p.seed = j.value("seed", std::uint64_t{0});
  p.skipped_degenerate = j.value("skipped_degenerate", std::size_t{0});
  p.one_sided = j.value("one_sided", false);
  return p;
}

void save_profile(const CalibrationProfile& p, const std::filesystem::path& path) {
  write_text_file(path, profile_json(p));
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(read_text_file(path));
}

CalibrationProfile profile_from_values(std::span<const double> values, Statistic statistic,
                                       double epsilon, std::uint64_t seed, std::size_t skipped) {
  if (values.size() < 2)
    throw DegenerateCalibration("calibration needs at least 2 usable states, got " +
                                std::to_string(values.size()));
  CompensatedSum total;
  for (double v : values) total.add(v);
  const double mean = total.value() / static_cast<double>(values.size());
  CompensatedSum squares;
  for (double v : values) squares.add((v - mean) * (v - mean));
  const double var = squares.value() / static_cast<double>(values.size() - 1);
  if (!(var > 0.0)) throw DegenerateCalibration("DegenerateCalibration: statistic has zero variance");
  CalibrationProfile p;
  p.statistic = statistic;
  p.epsilon = epsilon;
  p.mean = mean;
  p.std = std::sqrt(var);
  p.n = values.size();
  p.seed = seed;
  p.skipped_degenerate = skipped;
  return p;
}

CalibrationRun calibrate(const CostModel& model, std::span<const Vec64> base_obs, double epsilon,
                         Statistic statistic, std::uint64_t seed, int threads) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("calibrate: epsilon must be positive");
  std::vector<std::optional<double>> slots(base_obs.size());
  parallel_for(base_obs.size(), threads, [&](std::size_t i) {
    try {
      slots[i] = statistic_value(model, base_obs[i], statistic, epsilon, seed);
    } catch (const DegenerateGradient&) {
      slots[i].reset();
    }
  });
  CalibrationRun run;
  std::size_t skipped = 0;
  for (const auto& v : slots) {
    if (v)
      run.values.push_back(*v);
    else
      ++skipped;
  }
  run.profile = profile_from_values(run.values, statistic, epsilon, seed, skipped);
  return run;
}

double z_score(const CalibrationProfile& p, double value) {
  const double z = (value - p.mean) / p.std;
  return p.one_sided ? z : std::abs(z);
}

double choose_threshold(const CalibrationProfile& profile, std::span<const double> values,
                        double target_fpr) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0))
    throw std::invalid_argument("choose_threshold: target_fpr must lie in (0,1)");
  if (values.empty()) throw std::invalid_argument("choose_threshold: no calibration values");
  const double n = static_cast<double>(values.size());
  if (target_fpr < 1.0 / n)
    throw std::invalid_argument("choose_threshold: target_fpr " + format_double(target_fpr) +
                                " is below 1/n = " + format_double(1.0 / n) +
                                "; not resolvable from the calibration set");
  std::vector<double> z;
  z.reserve(values.size());
  for (double v : values) z.push_back(z_score(profile, v));
  std::sort(z.begin(), z.end());
  const double pos = (n - 1.0) * (1.0 - target_fpr);
  const auto idx = static_cast<std::size_t>(std::floor(pos + 1e-9));
  return z[std::min(idx, z.size() - 1)];
}

Detection detect_value(const CalibrationProfile& profile, double value) {
  if (!profile.t) throw std::logic_error("detect: profile has no threshold; run choose_threshold");
  Detection d;
  d.stat_value = value;
  const double z = z_score(profile, value);
  d.z_abs = std::abs(z);
  d.flagged = z > *profile.t;
  return d;
}

Detection detect(const CostModel& model, ConstVecView s, const CalibrationProfile& profile) {
  if (!profile.t) throw std::logic_error("detect: profile has no threshold; run choose_threshold");
  try {
    return detect_value(profile, statistic_value(model, s, profile.statistic, profile.epsilon, profile.seed));
  } catch (const DegenerateGradient&) {
    Detection d;
    d.stat_value = std::numeric_limits<double>::quiet_NaN();
    d.z_abs = std::numeric_limits<double>::infinity();
    d.flagged = true;
    d.reason = "degenerate_gradient";
    return d;
  }
}

Prop1Report verify_prop1(const CostModel& model, ConstVecView s0, const ActionDist& tau, double c,
                         const Prop1Budget& budget) {
  if (!(c > 0.0)) throw std::invalid_argument("verify_prop1: c must be positive");
  const Vec64 origin(s0.begin(), s0.end());
  auto objective = [&](const Vec64& s) {
    const Vec64 d = sub(s, origin);
    return model.cost(s, tau) + 0.5 * c * dot(d, d);
  };
  auto gradient = [&](const Vec64& s) {
    Vec64 g = model.cost_gradient(s, tau);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * (s[i] - origin[i]);
    return g;
  };

  Prop1Report report;
  Vec64 s = origin;
  double f = objective(s);
  double step = 1.0;
  for (int it = 0; it < budget.max_iters; ++it) {
    const Vec64 g = gradient(s);
    const double gg = dot(g, g);
    if (std::sqrt(gg) < budget.grad_tol) {
      report.converged = true;
      report.iterations = it;
      break;
    }
    step = std::min(step * 2.0, 1e3);
    Vec64 trial;
    double f_trial = 0.0;
    while (true) {
      trial = s;
      axpy(-step, g, trial);
      f_trial = objective(trial);
      if (f_trial <= f - 1e-4 * step * gg || step < 1e-16) break;
      step *= 0.5;
    }
    if (step < 1e-16) break;  // line search failed: no descent available numerically
    s = std::move(trial);
    f = f_trial;
    report.iterations = it + 1;
  }

  report.s_star = s;
  report.objective = f;
  Vec64 residual = model.cost_gradient(s, tau);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += c * (s[i] - origin[i]);
  report.gradient_residual = norm_l2(residual);
  if (report.converged) {
    const Mat64 h = fd_hessian([&](ConstVecView x) { return model.cost(x, tau); }, s,
                               budget.hessian_step);
    report.lambda_min = min_eigenvalue(h);
    report.margin = report.lambda_min + c;
  }
  return report;
}

}  // namespace inrd
