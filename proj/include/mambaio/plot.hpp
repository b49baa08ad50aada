#pragma once

#include <string>
#include <vector>

#include "mambaio/metrics.hpp"

namespace mambaio::plot {

// Static SVG overlay of two trajectories: polylines plus axis ticks.
std::string trajectory_svg(const metrics::Trajectory& est, const metrics::Trajectory& gt,
                           int width = 720, int height = 540);

void write_trajectory_svg(const std::string& path, const metrics::Trajectory& est,
                          const metrics::Trajectory& gt);

}  // namespace mambaio::plot
