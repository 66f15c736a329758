#include "inrd/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "inrd/io.hpp"

namespace inrd {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

std::string results_csv(const std::vector<ScoredState>& records) {
  std::ostringstream out;
  out << kResultsCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.episode << ',' << r.step << ',' << to_string(r.label) << ',' << r.attack << ','
        << format_double(r.stat) << ',' << format_double(r.z_abs) << ',' << (r.flagged ? 1 : 0) << ',';
    if (r.success) out << (*r.success ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

std::vector<ScoredState> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("results CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsCsvHeader)
    throw std::runtime_error("results CSV: unexpected header '" + line + "'");
  std::vector<ScoredState> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8)
      throw std::runtime_error("results CSV line " + std::to_string(lineno) + ": expected 8 fields");
    ScoredState r;
    r.episode = std::stoi(f[0]);
    r.step = std::stoi(f[1]);
    r.label = label_from_string(f[2]);
    r.attack = f[3];
    r.stat = std::stod(f[4]);
    r.z_abs = std::stod(f[5]);
    r.flagged = f[6] == "1";
    if (!f[7].empty()) r.success = f[7] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_json(const EvalSummary& s) {
  nlohmann::json j;
  j["statistic"] = to_string(s.statistic);
  j["epsilon"] = s.epsilon;
  j["target_fpr"] = s.target_fpr;
  j["base_states"] = s.base_states;
  j["mean_stat_base"] = number_or_null(s.mean_stat_base);
  j["realized_fpr"] = s.realized_fpr;
  j["fpr_count_interval_95"] = {s.fpr_ci_lo, s.fpr_ci_hi};
  j["attacks"] = nlohmann::json::array();
  for (const auto& a : s.attacks) {
    j["attacks"].push_back({{"attack", a.attack},
                            {"states", a.states},
                            {"successes", a.successes},
                            {"success_rate", a.success_rate},
                            {"mean_stat", number_or_null(a.mean_stat)},
                            {"auc", number_or_null(a.auc)},
                            {"tpr_at_fpr", number_or_null(a.tpr_at_fpr)},
                            {"tpr_calibrated", number_or_null(a.tpr_calibrated)}});
  }
  return j.dump(2) + "\n";
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& p : curve.points)
    out << format_double(p.fpr) << ',' << format_double(p.tpr) << ',' << format_double(p.threshold) << '\n';
  return out.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<SvgSeries>& series) {
  constexpr double width = 640, height = 420, left = 70, right = 160, top = 40, bottom = 60;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << fixed(top + ph + 18) << "\" text-anchor=\"middle\">"
      << xml_escape(format_double(std::round(fx * 1000) / 1000)) << "</text>\n";
    o << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(fy) + 4) << "\" text-anchor=\"end\">"
      << xml_escape(format_double(std::round(fy * 1000) / 1000)) << "</text>\n";
  }
  o << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(height - 16) << "\" text-anchor=\"middle\">"
    << xml_escape(x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << fixed(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 8];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << (first ? "" : " ") << fixed(px(s.x[i])) << ',' << fixed(py(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(si);
    o << "<line x1=\"" << fixed(left + pw + 12) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(left + pw + 32)
      << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fixed(left + pw + 38) << "\" y=\"" << fixed(ly + 4) << "\">" << xml_escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void emit_report(const std::vector<ScoredState>& records, const EvalSummary& summary,
                 const std::filesystem::path& out_dir) {
  write_text_file(out_dir / "results.csv", results_csv(records));
  write_text_file(out_dir / "summary.json", summary_json(summary));

  std::vector<double> base_z;
  for (const auto& r : records)
    if (r.label == Label::base) base_z.push_back(r.z_abs);

  std::vector<SvgSeries> roc_series, trace_series;
  auto base_trace = SvgSeries{"base", {}, {}};
  for (const auto& r : records)
    if (r.label == Label::base && r.episode == 0) {
      base_trace.x.push_back(r.step);
      base_trace.y.push_back(r.stat);
    }
  if (!base_trace.x.empty()) trace_series.push_back(base_trace);

  for (const auto& a : summary.attacks) {
    std::vector<double> scores = base_z;
    std::vector<bool> positive(base_z.size(), false);
    SvgSeries trace{a.attack, {}, {}};
    std::ostringstream trace_csv;
    trace_csv << "arm,step,stat\n";
    for (const auto& r : records) {
      if (r.label == Label::base && r.episode == 0)
        trace_csv << "base," << r.step << ',' << format_double(r.stat) << '\n';
    }
    for (const auto& r : records) {
      if (r.label != Label::adversarial || r.attack != a.attack) continue;
      if (r.episode == 0) {
        trace.x.push_back(r.step);
        trace.y.push_back(r.stat);
        trace_csv << "adversarial," << r.step << ',' << format_double(r.stat) << '\n';
      }
      if (!r.success.value_or(false)) continue;
      scores.push_back(r.z_abs);
      positive.push_back(true);
    }
    write_text_file(out_dir / ("trace_" + safe_name(a.attack) + ".csv"), trace_csv.str());
    if (!trace.x.empty()) trace_series.push_back(trace);
    if (a.successes == 0 || base_z.empty()) continue;
    const RocCurve curve = roc_from_scores(scores, positive);
    write_text_file(out_dir / ("roc_" + safe_name(a.attack) + ".csv"), roc_csv(curve));
    SvgSeries s{a.attack + " (AUC " + fixed(curve.auc, 3) + ")", {}, {}};
    for (const auto& p : curve.points) {
      s.x.push_back(p.fpr);
      s.y.push_back(p.tpr);
    }
    roc_series.push_back(std::move(s));
  }
  const std::string stat = summary.statistic == Statistic::so ? "L" : "K";
  if (!roc_series.empty())
    write_text_file(out_dir / "roc.svg",
                    svg_line_chart("ROC, " + to_string(summary.statistic) + " statistic", "false positive rate",
                                   "true positive rate", roc_series));
  if (!trace_series.empty())
    write_text_file(out_dir / "trace.svg",
                    svg_line_chart(stat + "(s) along episode 0", "step", stat + "(s)", trace_series));
}

}  // namespace inrd
