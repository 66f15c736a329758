// Command-line front end: train, rollout, calibrate, attack, detect, aware, eval, roc.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "inrd/agent.hpp"
#include "inrd/attacks.hpp"
#include "inrd/aware.hpp"
#include "inrd/detector.hpp"
#include "inrd/evaluation.hpp"
#include "inrd/gridworld.hpp"
#include "inrd/io.hpp"
#include "inrd/parallel.hpp"
#include "inrd/policy_net.hpp"
#include "inrd/report.hpp"

namespace fs = std::filesystem;
using namespace inrd;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string out_dir = ".";
};

fs::path resolve(const Globals& g, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? p : fs::path(g.out_dir) / p;
}

GridSpec env_or_default(const std::string& path) { return path.empty() ? GridSpec{} : load_grid_spec(path); }

std::vector<Vec64> observations(const std::vector<StateRecord>& records) {
  std::vector<Vec64> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.obs);
  return out;
}

std::string jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial-direction detection for Q-network policies"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Base seed of every random stream")->default_val(0);
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")->default_val(1);
  app.add_option("--out-dir", g.out_dir, "Directory that relative output paths are resolved against")
      ->default_val(".");

  // train
  std::string env_path, train_cfg_path, out_path;
  auto* train_cmd = app.add_subcommand("train", "Train a double-Q network on a grid world");
  train_cmd->add_option("--env", env_path, "Grid spec JSON (default: built-in 8x8 spec)");
  train_cmd->add_option("--config", train_cfg_path, "Training config JSON (missing fields keep defaults)");
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();

  // rollout
  std::string ckpt_path;
  int episodes = 10;
  auto* rollout_cmd = app.add_subcommand("rollout", "Record observations of greedy base episodes");
  rollout_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  rollout_cmd->add_option("--env", env_path, "Grid spec JSON");
  rollout_cmd->add_option("--episodes", episodes, "Number of episodes")->default_val(10);
  rollout_cmd->add_option("--out", out_path, "JSONL of {episode, step, obs}")->required();

  // calibrate
  std::string obs_path, stat_name = "so";
  double epsilon = kDefaultProbeEpsilon, fpr = 0.01;
  bool one_sided = false;
  auto* calib_cmd = app.add_subcommand("calibrate", "Fit the statistic's mean/std on base states and pick t");
  calib_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  calib_cmd->add_option("--obs", obs_path, "Base-state JSONL")->required();
  calib_cmd->add_option("--stat", stat_name, "Statistic: so|fo")->default_val("so");
  calib_cmd->add_option("--epsilon", epsilon, "Probe magnitude")->default_val(kDefaultProbeEpsilon);
  calib_cmd->add_option("--fpr", fpr, "Target false-positive rate")->default_val(0.01);
  calib_cmd->add_flag("--one-sided", one_sided, "Flag only values above the mean");
  calib_cmd->add_option("--out", out_path, "Profile JSON to write")->required();

  // attack
  std::string method_name = "fgsm", attack_cfg_path;
  auto* attack_cmd = app.add_subcommand("attack", "Perturb every observation of a JSONL file");
  attack_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  attack_cmd->add_option("--obs", obs_path, "Input JSONL")->required();
  attack_cmd->add_option("--method", method_name, "fgsm|ifgsm|mifgsm|nesterov|deepfool|cw|ead")
      ->default_val("fgsm");
  attack_cmd->add_option("--config", attack_cfg_path, "Attack config JSON (missing fields keep defaults)");
  attack_cmd->add_option("--out", out_path, "JSONL of {episode, step, method, success, norms, s_adv}")->required();

  // detect
  std::string profile_path;
  auto* detect_cmd = app.add_subcommand("detect", "Score observations against a calibrated profile");
  detect_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  detect_cmd->add_option("--profile", profile_path, "Profile JSON")->required();
  detect_cmd->add_option("--obs", obs_path, "JSONL with obs or s_adv per line")->required();
  detect_cmd->add_option("--out", out_path, "JSONL of {episode, step, stat_value, z_abs, flagged}")->required();

  // aware
  std::string kind_name = "so", grid_path, targets_path;
  double cap = 0.10;
  std::size_t max_states = 50;
  auto* aware_cmd = app.add_subcommand("aware", "Grid search of a detection-aware attack");
  aware_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  aware_cmd->add_option("--profile", profile_path, "Profile JSON (SO for so, FO for fo)")->required();
  aware_cmd->add_option("--kind", kind_name, "so|fo|featmatch")->default_val("so");
  aware_cmd->add_option("--grid", grid_path, "Aware config JSON with the grid (default grid when omitted)");
  aware_cmd->add_option("--cap", cap, "Allowed relative drop in success rate")->default_val(0.10);
  aware_cmd->add_option("--obs", obs_path, "States to attack (JSONL)")->required();
  aware_cmd->add_option("--targets", targets_path, "Feature-matching candidates (default: --obs)");
  aware_cmd->add_option("--max-states", max_states, "Use at most this many states")->default_val(50);
  aware_cmd->add_option("--out", out_path, "Report JSON")->required();

  // eval
  std::vector<std::string> attack_names;
  std::string attack_cfgs_path;
  bool degradation = false;
  auto* eval_cmd = app.add_subcommand("eval", "Base and attacked episodes, scores, ROC and summary");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--env", env_path, "Grid spec JSON");
  eval_cmd->add_option("--profile", profile_path, "Profile JSON")->required();
  eval_cmd->add_option("--attacks", attack_names, "Attacks to run (default: all seven)")->delimiter(',');
  eval_cmd->add_option("--attack-configs", attack_cfgs_path, "JSON object: method -> attack config");
  eval_cmd->add_option("--episodes", episodes, "Episodes per arm")->default_val(10);
  eval_cmd->add_option("--fpr", fpr, "FPR for TPR@FPR")->default_val(0.01);
  eval_cmd->add_flag("--degradation", degradation, "Also measure return degradation per attack");

  // roc
  std::string scores_path, attack_filter;
  bool include_failed = false, interpolate = false;
  auto* roc_cmd = app.add_subcommand("roc", "ROC curve and TPR@FPR from a results CSV");
  roc_cmd->add_option("--scores", scores_path, "results.csv written by eval")->required();
  roc_cmd->add_option("--attack", attack_filter, "Only adversarial rows of this attack");
  roc_cmd->add_flag("--include-failed", include_failed, "Keep adversarial rows whose attack failed");
  roc_cmd->add_option("--fpr", fpr, "FPR for TPR@FPR")->default_val(0.01);
  roc_cmd->add_flag("--interpolate", interpolate, "Interpolate TPR between ROC points");
  roc_cmd->add_option("--out", out_path, "ROC CSV (a .json and .svg are written next to it)")->required();

  CLI11_PARSE(app, argc, argv);

  g.seed_given = seed_opt->count() > 0;
  try {
    if (*train_cmd) {
      const GridSpec spec = env_or_default(env_path);
      TrainConfig cfg = train_cfg_path.empty() ? TrainConfig{} : train_config_from_json(read_text_file(train_cfg_path));
      if (g.seed_given) cfg.seed = g.seed;
      const TrainResult res = train(spec, cfg);
      const fs::path out = resolve(g, out_path);
      save_checkpoint(res.net, out);
      std::ostringstream curve;
      curve << "episode,return\n";
      for (std::size_t i = 0; i < res.episode_returns.size(); ++i)
        curve << i << ',' << format_double(res.episode_returns[i]) << '\n';
      write_text_file(fs::path(out).replace_extension(".curve.csv"), curve.str());
      std::ostringstream snaps;
      snaps << "step,mean_return\n";
      for (const auto& s : res.snapshots) snaps << s.step << ',' << format_double(s.mean_return) << '\n';
      write_text_file(fs::path(out).replace_extension(".eval.csv"), snaps.str());
      std::cout << "final greedy return " << format_double(res.final_eval_return) << "\n";
    } else if (*rollout_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const auto records = base_rollout(net, env_or_default(env_path), episodes, g.seed);
      write_state_records(resolve(g, out_path), records);
      std::cout << records.size() << " states\n";
    } else if (*calib_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const NetCost model(net);
      const auto obs = observations(read_state_records(obs_path));
      CalibrationRun run = calibrate(model, obs, epsilon, statistic_from_string(stat_name), g.seed, g.threads);
      run.profile.one_sided = one_sided;
      run.profile.t = choose_threshold(run.profile, run.values, fpr);
      run.profile.target_fpr = fpr;
      save_profile(run.profile, resolve(g, out_path));
      std::cout << "mean " << format_double(run.profile.mean) << " std " << format_double(run.profile.std)
                << " t " << format_double(*run.profile.t) << " (n=" << run.profile.n
                << ", skipped " << run.profile.skipped_degenerate << ")\n";
    } else if (*attack_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const AttackMethod method = attack_method_from_string(method_name);
      const AttackConfig cfg = attack_config_from_json(
          attack_cfg_path.empty() ? std::string{} : read_text_file(attack_cfg_path), method);
      const auto records = read_state_records(obs_path);
      std::vector<nlohmann::json> rows(records.size());
      parallel_for(records.size(), g.threads, [&](std::size_t i) {
        const AttackResult r = run_attack(net, records[i].obs, cfg);
        rows[i] = {{"episode", records[i].episode}, {"step", records[i].step},
                   {"method", to_string(r.method)},  {"success", r.success},
                   {"linf", r.linf},                  {"l2", r.l2},
                   {"l1", r.l1},                      {"iters", r.iters_used},
                   {"s_adv", r.s_adv}};
      });
      write_text_file(resolve(g, out_path), jsonl(rows));
    } else if (*detect_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const NetCost model(net);
      const CalibrationProfile profile = load_profile(profile_path);
      const auto records = read_state_records(obs_path);
      std::vector<nlohmann::json> rows(records.size());
      parallel_for(records.size(), g.threads, [&](std::size_t i) {
        const Detection d = detect(model, records[i].obs, profile);
        nlohmann::json row{{"episode", records[i].episode},
                           {"step", records[i].step},
                           {"stat_value", std::isfinite(d.stat_value) ? nlohmann::json(d.stat_value) : nlohmann::json(nullptr)},
                           {"z_abs", std::isfinite(d.z_abs) ? nlohmann::json(d.z_abs) : nlohmann::json(nullptr)},
                           {"flagged", d.flagged}};
        if (!d.reason.empty()) row["reason"] = d.reason;
        rows[i] = std::move(row);
      });
      write_text_file(resolve(g, out_path), jsonl(rows));
    } else if (*aware_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const CalibrationProfile profile = load_profile(profile_path);
      AwareConfig cfg = grid_path.empty() ? AwareConfig{} : aware_config_from_json(read_text_file(grid_path));
      cfg.success_drop_cap = cap;
      if (g.seed_given) cfg.seed = g.seed;
      auto states = observations(read_state_records(obs_path));
      if (states.size() > max_states) states.resize(max_states);
      const AwareKind kind = aware_kind_from_string(kind_name);
      std::vector<Vec64> targets;
      if (kind == AwareKind::featmatch) {
        const auto candidates =
            observations(read_state_records(targets_path.empty() ? obs_path : targets_path));
        for (const auto& s : states) targets.push_back(choose_feature_target(net, s, candidates));
      }
      const GridReport report = grid_search(kind, net, states, profile, cfg, targets, g.threads);
      write_text_file(resolve(g, out_path), grid_report_json(report));
      if (!report.warning.empty()) std::cerr << "warning: " << report.warning << "\n";
    } else if (*eval_cmd) {
      const PolicyNet net = load_checkpoint(ckpt_path);
      const GridSpec spec = env_or_default(env_path);
      const CalibrationProfile profile = load_profile(profile_path);
      const nlohmann::json overrides = attack_cfgs_path.empty() ? nlohmann::json::object()
                                                                : nlohmann::json::parse(read_text_file(attack_cfgs_path));
      if (attack_names.empty())
        for (auto m : all_attack_methods()) attack_names.push_back(to_string(m));
      std::vector<NamedAttack> attacks;
      for (const auto& name : attack_names) {
        const AttackMethod m = attack_method_from_string(name);
        const std::string text = overrides.contains(name) ? overrides[name].dump() : std::string{};
        attacks.push_back(named_attack(net, attack_config_from_json(text, m)));
      }
      const auto records = build_eval_set(net, spec, profile, attacks, episodes, g.seed, g.threads);
      const EvalSummary summary = summarize_eval(records, profile, fpr);
      emit_report(records, summary, fs::path(g.out_dir));
      if (degradation) {
        nlohmann::json d = nlohmann::json::array();
        for (const auto& a : attacks) {
          const Degradation r = return_degradation(net, spec, a, episodes, g.seed, g.threads);
          d.push_back({{"attack", a.name},
                       {"clean", r.clean},
                       {"attacked", r.attacked},
                       {"random", r.random},
                       {"fraction", std::isfinite(r.fraction) ? nlohmann::json(r.fraction) : nlohmann::json(nullptr)}});
        }
        write_text_file(fs::path(g.out_dir) / "degradation.json", d.dump(2) + "\n");
      }
      std::cout << summary_json(summary);
    } else if (*roc_cmd) {
      auto records = parse_results_csv(read_text_file(scores_path));
      if (!attack_filter.empty())
        std::erase_if(records, [&](const ScoredState& r) {
          return r.label == Label::adversarial && r.attack != attack_filter;
        });
      const RocCurve curve = roc(records, !include_failed);
      const fs::path out = resolve(g, out_path);
      write_text_file(out, roc_csv(curve));
      SvgSeries s{attack_filter.empty() ? "all attacks" : attack_filter, {}, {}};
      for (const auto& p : curve.points) {
        s.x.push_back(p.fpr);
        s.y.push_back(p.tpr);
      }
      write_text_file(fs::path(out).replace_extension(".svg"),
                      svg_line_chart("ROC", "false positive rate", "true positive rate", {s}));
      const nlohmann::json summary{{"auc", curve.auc},
                                   {"fpr", fpr},
                                   {"tpr_at_fpr", tpr_at_fpr(curve, fpr, interpolate)},
                                   {"interpolated", interpolate},
                                   {"positives", curve.positives},
                                   {"negatives", curve.negatives}};
      write_text_file(fs::path(out).replace_extension(".json"), summary.dump(2) + "\n");
      std::cout << summary.dump(2) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
