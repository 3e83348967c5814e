// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "spfm/eval.hpp"
#include "spfm/types.hpp"

namespace spfm::plot {

// All emitters return standalone SVG documents. Output depends only on the
// passed data (no timestamps, no locale), so identical inputs render
// byte-identical files.

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<Series>& series);

// Overlaid per-label bars of a loss-difference histogram.
std::string histogram_svg(const std::string& title, const eval::Histogram& h);

// One scatter panel: points colored by hue (degrees, e.g. the condition
// angle), with an annotation line under the title.
struct ScatterPanel {
  std::string title;
  std::string note;
  std::vector<Vec2> points;
  std::vector<double> hue_deg;
};

// Grid of panels, row-major, n_cols per row, shared axis range.
std::string scatter_grid_svg(const std::string& title,
                             const std::vector<ScatterPanel>& panels, int n_cols,
                             double axis_range);

}  // namespace spfm::plot
