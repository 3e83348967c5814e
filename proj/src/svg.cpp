// Copyright (c) 2026 spfm-lab authors
// SPDX-License-Identifier: Apache-2.0

#include "spfm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace spfm::plot {

namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out.push_back(c);
  }
  return out;
}

struct Frame {
  double x0, y0, w, h;      // pixel box of the plot area
  double lo_x, hi_x, lo_y, hi_y;  // data range

  double px(double x) const { return x0 + (x - lo_x) / (hi_x - lo_x) * w; }
  double py(double y) const { return y0 + h - (y - lo_y) / (hi_y - lo_y) * h; }
};

void draw_axes(std::ostringstream& os, const Frame& f, const std::string& x_label,
               const std::string& y_label) {
  os << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\""
     << num(f.w) << "\" height=\"" << num(f.h)
     << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  os << "<text x=\"" << num(f.x0 + f.w / 2) << "\" y=\"" << num(f.y0 + f.h + 32)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << esc(x_label)
     << "</text>\n";
  os << "<text x=\"" << num(f.x0 - 44) << "\" y=\"" << num(f.y0 + f.h / 2)
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 "
     << num(f.x0 - 44) << " " << num(f.y0 + f.h / 2) << ")\">" << esc(y_label)
     << "</text>\n";
  // Range ticks at the corners.
  os << "<text x=\"" << num(f.x0) << "\" y=\"" << num(f.y0 + f.h + 16)
     << "\" font-size=\"10\" text-anchor=\"middle\">" << num(f.lo_x)
     << "</text>\n";
  os << "<text x=\"" << num(f.x0 + f.w) << "\" y=\"" << num(f.y0 + f.h + 16)
     << "\" font-size=\"10\" text-anchor=\"middle\">" << num(f.hi_x)
     << "</text>\n";
  os << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.y0 + f.h + 4)
     << "\" font-size=\"10\" text-anchor=\"end\">" << num(f.lo_y) << "</text>\n";
  os << "<text x=\"" << num(f.x0 - 6) << "\" y=\"" << num(f.y0 + 10)
     << "\" font-size=\"10\" text-anchor=\"end\">" << num(f.hi_y) << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label,
                           const std::vector<Series>& series) {
  if (series.empty()) throw InputError("line_chart_svg: no series");
  double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
  bool first = true;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw InputError("line_chart_svg: bad series '" + s.name + "'");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        lo_x = hi_x = s.x[i];
        lo_y = hi_y = s.y[i];
        first = false;
      }
      lo_x = std::min(lo_x, s.x[i]);
      hi_x = std::max(hi_x, s.x[i]);
      lo_y = std::min(lo_y, s.y[i]);
      hi_y = std::max(hi_y, s.y[i]);
    }
  }
  if (hi_x == lo_x) hi_x = lo_x + 1;
  lo_y = std::min(lo_y, 0.0);
  if (hi_y == lo_y) hi_y = lo_y + 1;
  hi_y += (hi_y - lo_y) * 0.05;

  const double W = 560, H = 360;
  Frame f{64, 40, W - 96, H - 104, lo_x, hi_x, lo_y, hi_y};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(W / 2)
     << "\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">" << esc(title)
     << "</text>\n";
  draw_axes(os, f, x_label, y_label);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << num(f.px(s.x[i])) << ',' << num(f.py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\""
         << num(f.py(s.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << num(f.x0 + f.w - 4) << "\" y=\""
       << num(f.y0 + 14 + 14 * static_cast<double>(si))
       << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">"
       << esc(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string histogram_svg(const std::string& title, const eval::Histogram& h) {
  const std::size_t bins = h.counts_correct.size();
  if (bins == 0 || h.edges.size() != bins + 1)
    throw InputError("histogram_svg: malformed histogram");
  long max_count = 1;
  for (std::size_t i = 0; i < bins; ++i)
    max_count = std::max({max_count, h.counts_correct[i], h.counts_incorrect[i]});

  const double W = 560, H = 360;
  Frame f{64,          40,          W - 96,
          H - 104,     h.edges.front(), h.edges.back(),
          0.0,         static_cast<double>(max_count) * 1.05};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(W / 2)
     << "\" y=\"24\" font-size=\"14\" text-anchor=\"middle\">" << esc(title)
     << "</text>\n";
  draw_axes(os, f, "loss difference", "count");

  auto bars = [&](const std::vector<long>& counts, const char* color) {
    for (std::size_t i = 0; i < bins; ++i) {
      if (counts[i] == 0) continue;
      const double x0 = f.px(h.edges[i]);
      const double x1 = f.px(h.edges[i + 1]);
      const double y = f.py(static_cast<double>(counts[i]));
      os << "<rect x=\"" << num(x0) << "\" y=\"" << num(y) << "\" width=\""
         << num(x1 - x0) << "\" height=\"" << num(f.y0 + f.h - y) << "\" fill=\""
         << color << "\" fill-opacity=\"0.45\"/>\n";
    }
  };
  bars(h.counts_correct, kPalette[0]);
  bars(h.counts_incorrect, kPalette[1]);
  os << "<text x=\"" << num(f.x0 + f.w - 4) << "\" y=\"" << num(f.y0 + 14)
     << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kPalette[0]
     << "\">correct</text>\n";
  os << "<text x=\"" << num(f.x0 + f.w - 4) << "\" y=\"" << num(f.y0 + 28)
     << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << kPalette[1]
     << "\">incorrect</text>\n";
  // Zero-threshold marker.
  if (h.edges.front() < 0.0 && h.edges.back() > 0.0)
    os << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.y0) << "\" x2=\""
       << num(f.px(0)) << "\" y2=\"" << num(f.y0 + f.h)
       << "\" stroke=\"#444\" stroke-dasharray=\"4 3\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string scatter_grid_svg(const std::string& title,
                             const std::vector<ScatterPanel>& panels, int n_cols,
                             double axis_range) {
  if (panels.empty()) throw InputError("scatter_grid_svg: no panels");
  if (n_cols < 1) throw InputError("scatter_grid_svg: n_cols must be >= 1");
  const int n_rows =
      (static_cast<int>(panels.size()) + n_cols - 1) / n_cols;
  const double cell = 230, pad = 16, top = 44;
  const double W = pad + n_cols * (cell + pad);
  const double H = top + n_rows * (cell + pad + 30);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W)
     << "\" height=\"" << num(H) << "\" viewBox=\"0 0 " << num(W) << " "
     << num(H) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(W / 2)
     << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">" << esc(title)
     << "</text>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const ScatterPanel& p = panels[pi];
    if (p.points.size() != p.hue_deg.size())
      throw InputError("scatter_grid_svg: hue/point count mismatch");
    const int row = static_cast<int>(pi) / n_cols;
    const int col = static_cast<int>(pi) % n_cols;
    const double ox = pad + col * (cell + pad);
    const double oy = top + row * (cell + pad + 30);
    os << "<text x=\"" << num(ox + cell / 2) << "\" y=\"" << num(oy - 4)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << esc(p.title)
       << "</text>\n";
    os << "<rect x=\"" << num(ox) << "\" y=\"" << num(oy) << "\" width=\""
       << num(cell) << "\" height=\"" << num(cell)
       << "\" fill=\"#fafafa\" stroke=\"#444\"/>\n";
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      const double x = p.points[i].x();
      const double y = p.points[i].y();
      if (std::abs(x) > axis_range || std::abs(y) > axis_range) continue;
      const double cx = ox + (x + axis_range) / (2 * axis_range) * cell;
      const double cy = oy + cell - (y + axis_range) / (2 * axis_range) * cell;
      int hue = static_cast<int>(std::lround(p.hue_deg[i])) % 360;
      if (hue < 0) hue += 360;
      os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy)
         << "\" r=\"1.4\" fill=\"hsl(" << hue << ",80%,45%)\"/>\n";
    }
    os << "<text x=\"" << num(ox + cell / 2) << "\" y=\"" << num(oy + cell + 16)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << esc(p.note)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace spfm::plot
