// Minimal SVG line plots. The numeric table behind every plot is embedded in
// a <metadata> element as JSON.
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvf::plot {

struct Series {
  std::string name;
  std::vector<double> values;  // NaN points are skipped
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> x_ticks;
  std::vector<Series> series;
  double y_min = 0.0;
  double y_max = 1.0;
  bool auto_range = false;
};

std::string render_svg(const LinePlot& plot, const nlohmann::json& table);
void write_svg(const std::string& path, const LinePlot& plot, const nlohmann::json& table);

/// Table embedded in an SVG written by write_svg.
nlohmann::json read_svg_table(const std::string& path);

/// Plot of a compression sweep table (rows: quality, map, f1).
LinePlot sweep_plot(const nlohmann::json& table);
/// Plot of a training-curves CSV (loss and validation accuracy per epoch).
LinePlot curves_plot(const std::string& csv_path, nlohmann::json& table_out);

}  // namespace mvf::plot
