#pragma once

#include <string>
#include <utility>
#include <vector>

namespace dynrisk::cli {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // (time, value)
};

/// Self-contained SVG line chart with axes and a legend. A series with one
/// point is drawn as a marker only. Output depends only on the input.
std::string render_plot(const std::vector<Series>& series, const std::string& title);

// Writes render_plot to `path`; throws std::runtime_error when it cannot.
void emit_plot(const std::vector<Series>& series, const std::string& path,
               const std::string& title = "");

}  // namespace dynrisk::cli
