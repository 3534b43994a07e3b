#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "moral_lens/compass.hpp"
#include "moral_lens/runner.hpp"

namespace moral_lens {

struct CompassArrow {
  std::string label;
  Coordinates from;  // reject / rejection group
  Coordinates to;    // endorse / endorsement group
};

struct CompassPoint {
  std::string label;
  Coordinates at;
};

/// Political-compass scatter on [-10, 10]^2 with one arrow per entry and
/// optional reference points (the unconditioned base answers).
std::string render_compass_svg(std::string_view title, const std::vector<CompassArrow>& arrows,
                               const std::vector<CompassPoint>& references = {});

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series
};

/// Grouped vertical bar chart with a fixed [0, y_max] scale.
std::string render_bar_chart_svg(std::string_view title, const std::vector<std::string>& series,
                                 const std::vector<BarGroup>& groups, double y_max = 1.0);

/// Writes <run_dir>/report: compass plots, rate bar charts, wide metric
/// tables, judge and cohort sections when their outputs exist, and index.md.
/// NoCompletedCellsError when no (endorse, reject) pair has coordinates.
void write_report(const std::filesystem::path& run_dir, const ExperimentConfig& config,
                  const std::vector<CellResult>& cells, const RunMetrics& metrics);

}  // namespace moral_lens
