// Hand-emitted standalone SVG line plots of trajectory columns.
#pragma once

#include <string>
#include <vector>

#include "distlab/trajectory.hpp"

namespace distlab {

struct PlotSpec {
  std::string x_column;
  std::vector<std::string> y_columns;
  bool log_x = false;
  bool log_y = false;
  std::string title;
};

// One polyline per y column, axis labels from the column names, legend when
// more than one series. Throws on an empty log or a missing column.
std::string render_svg(const TrajectoryLog& log, const PlotSpec& spec);

}  // namespace distlab
