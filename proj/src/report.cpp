#include "moral_lens/report.hpp"

#include <algorithm>
#include <array>
#include <map>

#include <nlohmann/json.hpp>

#include "moral_lens/errors.hpp"
#include "moral_lens/util.hpp"

namespace fs = std::filesystem;

namespace moral_lens {

namespace {

constexpr std::array<std::string_view, 12> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#393b79", "#637939"};

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string f2(double v) { return format_fixed(v, 2); }

// Compass geometry: 22 px per unit, plot origin at (40, 40).
constexpr double kUnit = 22.0;
constexpr double kPad = 40.0;
double px(double economic) { return kPad + (economic + 10.0) * kUnit; }
double py(double social) { return kPad + (10.0 - social) * kUnit; }

}  // namespace

std::string render_compass_svg(std::string_view title, const std::vector<CompassArrow>& arrows,
                               const std::vector<CompassPoint>& references) {
  const double plot = 20.0 * kUnit;
  const double width = plot + 2 * kPad;
  const std::size_t legend_rows = arrows.size() + (references.empty() ? 0 : 1);
  const double height = plot + 2 * kPad + 20.0 + 16.0 * static_cast<double>(legend_rows);
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(width) + "\" height=\"" + f2(height) +
       "\" viewBox=\"0 0 " + f2(width) + " " + f2(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<title>" + xml_escape(title) + "</title>\n";
  s += "<defs>\n";
  for (std::size_t i = 0; i < std::max<std::size_t>(arrows.size(), 1); ++i) {
    const auto color = kPalette[i % kPalette.size()];
    s += "<marker id=\"head" + std::to_string(i) +
         "\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"7\" markerHeight=\"7\" "
         "orient=\"auto-start-reverse\"><path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"" +
         std::string(color) + "\"/></marker>\n";
  }
  s += "</defs>\n";
  s += "<text x=\"" + f2(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
       xml_escape(title) + "</text>\n";

  // Quadrants: authoritarian left/right on top, libertarian left/right below.
  const double mid_x = px(0.0);
  const double mid_y = py(0.0);
  const double half = plot / 2;
  s += "<rect x=\"" + f2(kPad) + "\" y=\"" + f2(kPad) + "\" width=\"" + f2(half) + "\" height=\"" + f2(half) +
       "\" fill=\"#f9bbbb\" fill-opacity=\"0.45\"/>\n";
  s += "<rect x=\"" + f2(mid_x) + "\" y=\"" + f2(kPad) + "\" width=\"" + f2(half) + "\" height=\"" + f2(half) +
       "\" fill=\"#92d9f8\" fill-opacity=\"0.45\"/>\n";
  s += "<rect x=\"" + f2(kPad) + "\" y=\"" + f2(mid_y) + "\" width=\"" + f2(half) + "\" height=\"" + f2(half) +
       "\" fill=\"#c9e5bd\" fill-opacity=\"0.45\"/>\n";
  s += "<rect x=\"" + f2(mid_x) + "\" y=\"" + f2(mid_y) + "\" width=\"" + f2(half) + "\" height=\"" + f2(half) +
       "\" fill=\"#f5f5a3\" fill-opacity=\"0.45\"/>\n";

  s += "<g stroke=\"#ffffff\" stroke-width=\"0.6\">\n";
  for (int k = -10; k <= 10; ++k) {
    if (k == 0) continue;
    s += "<line x1=\"" + f2(px(k)) + "\" y1=\"" + f2(kPad) + "\" x2=\"" + f2(px(k)) + "\" y2=\"" +
         f2(kPad + plot) + "\"/>\n";
    s += "<line x1=\"" + f2(kPad) + "\" y1=\"" + f2(py(k)) + "\" x2=\"" + f2(kPad + plot) + "\" y2=\"" +
         f2(py(k)) + "\"/>\n";
  }
  s += "</g>\n";
  s += "<rect x=\"" + f2(kPad) + "\" y=\"" + f2(kPad) + "\" width=\"" + f2(plot) + "\" height=\"" + f2(plot) +
       "\" fill=\"none\" stroke=\"#333333\"/>\n";
  s += "<line x1=\"" + f2(kPad) + "\" y1=\"" + f2(mid_y) + "\" x2=\"" + f2(kPad + plot) + "\" y2=\"" + f2(mid_y) +
       "\" stroke=\"#333333\" stroke-width=\"1.2\"/>\n";
  s += "<line x1=\"" + f2(mid_x) + "\" y1=\"" + f2(kPad) + "\" x2=\"" + f2(mid_x) + "\" y2=\"" + f2(kPad + plot) +
       "\" stroke=\"#333333\" stroke-width=\"1.2\"/>\n";
  s += "<text x=\"" + f2(mid_x) + "\" y=\"" + f2(kPad - 6) + "\" text-anchor=\"middle\">Authoritarian</text>\n";
  s += "<text x=\"" + f2(mid_x) + "\" y=\"" + f2(kPad + plot + 14) + "\" text-anchor=\"middle\">Libertarian</text>\n";
  s += "<text x=\"" + f2(kPad + 2) + "\" y=\"" + f2(mid_y - 4) + "\">Left</text>\n";
  s += "<text x=\"" + f2(kPad + plot - 2) + "\" y=\"" + f2(mid_y - 4) + "\" text-anchor=\"end\">Right</text>\n";
  for (int k : {-10, -5, 5, 10}) {
    s += "<text x=\"" + f2(px(k)) + "\" y=\"" + f2(mid_y + 12) + "\" text-anchor=\"middle\" fill=\"#555555\">" +
         std::to_string(k) + "</text>\n";
    s += "<text x=\"" + f2(mid_x + 3) + "\" y=\"" + f2(py(k) + 4) + "\" fill=\"#555555\">" + std::to_string(k) +
         "</text>\n";
  }

  for (const auto& r : references) {
    s += "<rect class=\"reference\" x=\"" + f2(px(r.at.economic) - 4) + "\" y=\"" + f2(py(r.at.social) - 4) +
         "\" width=\"8\" height=\"8\" fill=\"#444444\" fill-opacity=\"0.6\"><title>" + xml_escape(r.label) +
         " (" + f2(r.at.economic) + ", " + f2(r.at.social) + ")</title></rect>\n";
  }
  for (std::size_t i = 0; i < arrows.size(); ++i) {
    const auto& a = arrows[i];
    const auto color = std::string(kPalette[i % kPalette.size()]);
    s += "<circle cx=\"" + f2(px(a.from.economic)) + "\" cy=\"" + f2(py(a.from.social)) +
         "\" r=\"3.5\" fill=\"#ffffff\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    s += "<line class=\"shift\" x1=\"" + f2(px(a.from.economic)) + "\" y1=\"" + f2(py(a.from.social)) +
         "\" x2=\"" + f2(px(a.to.economic)) + "\" y2=\"" + f2(py(a.to.social)) + "\" stroke=\"" + color +
         "\" stroke-width=\"1.8\" marker-end=\"url(#head" + std::to_string(i) + ")\"><title>" +
         xml_escape(a.label) + ": (" + f2(a.from.economic) + ", " + f2(a.from.social) + ") to (" +
         f2(a.to.economic) + ", " + f2(a.to.social) + ")</title></line>\n";
  }

  double y = kPad + plot + 34;
  for (std::size_t i = 0; i < arrows.size(); ++i) {
    const auto color = std::string(kPalette[i % kPalette.size()]);
    s += "<line x1=\"" + f2(kPad) + "\" y1=\"" + f2(y - 4) + "\" x2=\"" + f2(kPad + 18) + "\" y2=\"" + f2(y - 4) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + f2(kPad + 24) + "\" y=\"" + f2(y) + "\">" + xml_escape(arrows[i].label) +
         " (reject to endorse)</text>\n";
    y += 16;
  }
  if (!references.empty()) {
    s += "<rect x=\"" + f2(kPad + 5) + "\" y=\"" + f2(y - 8) + "\" width=\"8\" height=\"8\" fill=\"#444444\" "
         "fill-opacity=\"0.6\"/>\n";
    s += "<text x=\"" + f2(kPad + 24) + "\" y=\"" + f2(y) + "\">Base (unconditioned)</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string render_bar_chart_svg(std::string_view title, const std::vector<std::string>& series,
                                 const std::vector<BarGroup>& groups, double y_max) {
  if (!(y_max > 0.0)) y_max = 1.0;
  const double bar = 14.0;
  const double gap = 18.0;
  const double group_w = bar * static_cast<double>(std::max<std::size_t>(series.size(), 1)) + gap;
  const double left = 50.0;
  const double top = 40.0;
  const double plot_h = 220.0;
  const double plot_w = std::max(200.0, group_w * static_cast<double>(groups.size()) + gap);
  const double width = left + plot_w + 20.0;
  const double height = top + plot_h + 70.0 + 16.0 * static_cast<double>(series.size());
  const auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, y_max) / y_max); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(width) + "\" height=\"" + f2(height) +
       "\" viewBox=\"0 0 " + f2(width) + " " + f2(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<title>" + xml_escape(title) + "</title>\n";
  s += "<text x=\"" + f2(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
       "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0;
    s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(y_of(v)) + "\" x2=\"" + f2(left + plot_w) + "\" y2=\"" +
         f2(y_of(v)) + "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + f2(left - 6) + "\" y=\"" + f2(y_of(v) + 4) + "\" text-anchor=\"end\">" + f2(v) +
         "</text>\n";
  }
  s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top + plot_h) + "\" x2=\"" + f2(left + plot_w) + "\" y2=\"" +
       f2(top + plot_h) + "\" stroke=\"#333333\"/>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double x0 = left + gap + group_w * static_cast<double>(g);
    for (std::size_t k = 0; k < groups[g].values.size() && k < series.size(); ++k) {
      const double v = groups[g].values[k];
      const double x = x0 + bar * static_cast<double>(k);
      s += "<rect class=\"bar\" x=\"" + f2(x) + "\" y=\"" + f2(y_of(v)) + "\" width=\"" + f2(bar - 2) +
           "\" height=\"" + f2(top + plot_h - y_of(v)) + "\" fill=\"" + std::string(kPalette[k % kPalette.size()]) +
           "\"><title>" + xml_escape(groups[g].label) + " " + xml_escape(series[k]) + ": " + format_fixed(v, 3) +
           "</title></rect>\n";
    }
    s += "<text x=\"" + f2(x0 + (group_w - gap) / 2) + "\" y=\"" + f2(top + plot_h + 14) +
         "\" text-anchor=\"middle\">" + xml_escape(groups[g].label) + "</text>\n";
  }
  double y = top + plot_h + 40;
  for (std::size_t k = 0; k < series.size(); ++k) {
    s += "<rect x=\"" + f2(left) + "\" y=\"" + f2(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         std::string(kPalette[k % kPalette.size()]) + "\"/>\n";
    s += "<text x=\"" + f2(left + 16) + "\" y=\"" + f2(y) + "\">" + xml_escape(series[k]) + "</text>\n";
    y += 16;
  }
  s += "</svg>\n";
  return s;
}

namespace {

std::string slug(const MoralValue& v, Framing f) {
  return sanitize_component(v.name) + "_" + std::string(to_string(f));
}

const MetricsSummary* find_summary(const RunMetrics& m, const MoralValue& v, Framing f) {
  for (const auto& s : m.summaries) {
    if (s.value == v && s.framing == f) return &s;
  }
  return nullptr;
}

// Wide table: one row per value, one column block per framing.
template <class Fn>
std::string wide_table(const ExperimentConfig& config, const RunMetrics& m,
                       const std::vector<std::string>& fields, Fn&& cells) {
  std::string out = "value";
  for (Framing f : config.framings) {
    for (const auto& field : fields) out += "," + std::string(display_name(f)) + " " + field;
  }
  out += "\n";
  for (const auto& v : config.values) {
    out += v.value.name;
    for (Framing f : config.framings) {
      const auto* s = find_summary(m, v.value, f);
      const auto row = s ? cells(*s) : std::vector<std::string>(fields.size());
      for (const auto& c : row) out += "," + c;
    }
    out += "\n";
  }
  return out;
}

std::string opt2(const std::optional<double>& v) { return v ? f2(*v) : std::string(); }

}  // namespace

void write_report(const fs::path& run_dir, const ExperimentConfig& config, const std::vector<CellResult>& cells,
                  const RunMetrics& metrics) {
  if (metrics.pairs.empty()) {
    throw NoCompletedCellsError("run " + config.run_id + " has no scored (endorse, reject) pair");
  }
  const auto dir = run_dir / "report";
  std::vector<std::string> index;
  index.push_back("# Run " + config.run_id + "\n");
  index.push_back(
      "Coordinates come from the weight table recorded in the manifest. Absolute positions depend on "
      "that table; shifts between conditions are comparable under any fixed table.\n");

  std::map<std::string, Coordinates> base;
  for (const auto& c : cells) {
    if (c.key.framing == Framing::base && c.coordinates) base[c.key.model_id] = *c.coordinates;
  }

  index.push_back("## Compass plots\n");
  for (const auto& v : config.values) {
    for (Framing f : config.framings) {
      std::vector<CompassArrow> arrows;
      std::vector<BarGroup> bars;
      std::vector<CompassPoint> refs;
      for (const auto& p : metrics.pairs) {
        if (p.value != v.value || p.framing != f) continue;
        arrows.push_back({p.model_id, p.reject, p.endorse});
        bars.push_back({p.model_id, {p.strong_reject, p.strong_endorse, p.stance_reversal}});
        if (auto it = base.find(p.model_id); it != base.end()) refs.push_back({p.model_id + " base", it->second});
      }
      if (arrows.empty()) continue;
      const auto name = slug(v.value, f);
      const auto title = v.value.name + " / " + std::string(display_name(f));
      write_text_file_atomic(dir / ("compass_" + name + ".svg"), render_compass_svg(title, arrows, refs));
      write_text_file_atomic(dir / ("rates_" + name + ".svg"),
                             render_bar_chart_svg(title + " response rates",
                                                  {"strong (reject)", "strong (endorse)", "stance reversal"},
                                                  bars));
      index.push_back("- " + title + ": [compass](compass_" + name + ".svg), [rates](rates_" + name + ".svg)");
    }
  }
  index.push_back("");

  write_text_file_atomic(
      dir / "table_shift.csv",
      wide_table(config, metrics, {"mean_shift_e", "mean_shift_s", "mean_magnitude", "sign_e", "sign_s", "flip_e", "flip_s"},
                 [](const MetricsSummary& s) {
                   return std::vector<std::string>{f2(s.mean_shift.economic), f2(s.mean_shift.social),
                                                   f2(s.mean_magnitude),      f2(s.directional_bias.economic),
                                                   f2(s.directional_bias.social), f2(s.flip_rate.economic),
                                                   f2(s.flip_rate.social)};
                 }));
  write_text_file_atomic(dir / "table_mrl.csv",
                         wide_table(config, metrics, {"mrl"}, [](const MetricsSummary& s) {
                           return std::vector<std::string>{opt2(s.mrl)};
                         }));
  write_text_file_atomic(
      dir / "table_dispersion.csv",
      wide_table(config, metrics, {"centroid_rej", "R_rej", "centroid_eds", "R_eds"}, [](const MetricsSummary& s) {
        return std::vector<std::string>{
            "\"(" + f2(s.centroid_reject.economic) + ", " + f2(s.centroid_reject.social) + ")\"",
            f2(s.dispersion_reject),
            "\"(" + f2(s.centroid_endorse.economic) + ", " + f2(s.centroid_endorse.social) + ")\"",
            f2(s.dispersion_endorse)};
      }));
  index.push_back("## Tables\n");
  index.push_back("Display values are rounded to two decimals; full precision is in metrics/summary.csv.\n");
  index.push_back("- [mean shift, magnitude, directional bias, flip rate](table_shift.csv)");
  index.push_back("- [mean resultant length](table_mrl.csv)");
  index.push_back("- [centroids and RMS dispersion](table_dispersion.csv)");
  index.push_back("");

  const auto judge_path = run_dir / "judge" / "ratings.json";
  if (fs::exists(judge_path)) {
    const auto judge = nlohmann::json::parse(read_text_file(judge_path));
    std::string table = "value";
    for (Framing f : config.framings) table += "," + std::string(display_name(f));
    table += "\n";
    for (const auto& v : config.values) {
      table += v.value.name;
      for (Framing f : config.framings) {
        std::string cell;
        for (const auto& r : judge) {
          if (r.at("value") == v.value.name && r.at("framing") == to_string(f) && r.at("mean").is_number()) {
            cell = f2(r["mean"].get<double>());
          }
        }
        table += "," + cell;
      }
      table += "\n";
    }
    write_text_file_atomic(dir / "table_judge.csv", table);
    index.push_back("## Judge\n");
    index.push_back("- [mean grounding rating per value and framing](table_judge.csv); counts and failures in "
                    "judge/summary.csv");
    index.push_back("");
  }

  const auto cohort_path = run_dir / "cohort" / "summary.json";
  if (fs::exists(cohort_path)) {
    const auto cohort = nlohmann::json::parse(read_text_file(cohort_path));
    index.push_back("## Human cohort\n");
    for (const auto& g : cohort) {
      const auto value = g.at("value").get<std::string>();
      const Coordinates eds{g["endorsement"][0].get<double>(), g["endorsement"][1].get<double>()};
      const Coordinates rej{g["rejection"][0].get<double>(), g["rejection"][1].get<double>()};
      const auto file = "cohort_" + sanitize_component(value) + ".svg";
      write_text_file_atomic(dir / file, render_compass_svg(value + " / human groups", {{"humans", rej, eds}}));
      index.push_back("- " + value + ": rejection (" + f2(rej.economic) + ", " + f2(rej.social) +
                      ") to endorsement (" + f2(eds.economic) + ", " + f2(eds.social) + "), [plot](" + file +
                      "); ties go to rejection");
    }
    index.push_back("");
  }

  if (!metrics.notes.empty()) {
    index.push_back("## Notes\n");
    for (const auto& n : metrics.notes) index.push_back("- " + n);
    index.push_back("");
  }

  std::string md;
  for (const auto& line : index) md += line + "\n";
  write_text_file_atomic(dir / "index.md", md);
}

}  // namespace moral_lens
