#pragma once

#include <optional>
#include <string>
#include <vector>

namespace geoprobe::svg {

struct LineSeries {
  std::string name;
  /// One entry per x value; missing points break the line.
  std::vector<std::optional<double>> values;
};

struct PathSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Self-contained line chart. Output depends only on the arguments.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& xs, const std::vector<LineSeries>& series);

/// 2D paths with a marker at each vertex and a larger one at the start.
std::string path_plot(const std::string& title, const std::vector<PathSeries>& paths);

}  // namespace geoprobe::svg
