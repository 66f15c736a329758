#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "inrd/evaluation.hpp"

namespace inrd {

inline constexpr const char* kResultsCsvHeader = "episode,step,label,attack,stat,z_abs,flagged,success";

std::string results_csv(const std::vector<ScoredState>& records);
/// Parses a results CSV written by results_csv (observations are not stored there).
std::vector<ScoredState> parse_results_csv(const std::string& text);

std::string summary_json(const EvalSummary& summary);
std::string roc_csv(const RocCurve& curve);

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal static line chart; identical input gives identical bytes.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<SvgSeries>& series);

/// Writes into out_dir:
///   results.csv                  one row per record
///   summary.json                 per-attack summary
///   roc_<attack>.csv             ROC points of each attack against the base states
///   trace_<attack>.csv           statistic along episode 0 of the base and attacked arms
///   roc.svg, trace.svg           the same data as charts
/// Throws with the failing path on I/O errors.
void emit_report(const std::vector<ScoredState>& records, const EvalSummary& summary,
                 const std::filesystem::path& out_dir);

}  // namespace inrd
