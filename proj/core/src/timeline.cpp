#include "phasedet/timeline.hpp"

#include <array>
#include <cstdio>
#include <string_view>

#include "phasedet/error.hpp"
#include "phasedet/phase.hpp"

namespace phasedet {

namespace {

constexpr std::array<std::string_view, kNumPhases> kPalette = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1",
};

constexpr double kPlotLeft = 170.0;
constexpr double kPlotWidth = 900.0;
constexpr double kRibbonHeight = 26.0;
constexpr double kRibbonGap = 12.0;
constexpr double kTop = 16.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (const char c : s) {
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

int pick_minute_step(double total_minutes) {
  for (const int step : {1, 2, 5, 10, 15, 30, 60, 120, 240}) {
    if (total_minutes / step <= 10.0) return step;
  }
  return 480;
}

}  // namespace

std::string render_timeline_svg(const std::vector<int>& truth,
                                const std::vector<TimelineRow>& rows) {
  if (truth.empty()) throw DataError("render_timeline_svg: empty input");
  for (const auto& row : rows) {
    if (row.labels.size() != truth.size()) {
      throw DataError("render_timeline_svg: row '" + row.caption + "' length mismatch");
    }
  }

  std::vector<TimelineRow> all;
  all.push_back({"ground truth", truth});
  all.insert(all.end(), rows.begin(), rows.end());

  const std::size_t frames = truth.size();
  const double x_per_frame = kPlotWidth / static_cast<double>(frames);
  const double axis_y =
      kTop + static_cast<double>(all.size()) * (kRibbonHeight + kRibbonGap) + 8.0;
  const double legend_y = axis_y + 34.0;
  const double height = legend_y + 26.0;
  const double width = kPlotLeft + kPlotWidth + 20.0;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
         fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
  svg += "  <style>text { font-family: sans-serif; font-size: 12px; }</style>\n";

  double y = kTop;
  for (const auto& row : all) {
    svg += "  <g class=\"ribbon\" data-row=\"" + escape_xml(row.caption) + "\">\n";
    svg += "    <text x=\"" + fmt(kPlotLeft - 8.0) + "\" y=\"" + fmt(y + kRibbonHeight / 2 + 4) +
           "\" text-anchor=\"end\">" + escape_xml(row.caption) + "</text>\n";
    std::size_t run_start = 0;
    for (std::size_t t = 1; t <= frames; ++t) {
      if (t == frames || row.labels[t] != row.labels[run_start]) {
        const int label = row.labels[run_start];
        if (!is_valid_phase(label)) {
          throw DataError("render_timeline_svg: label out of range in row '" + row.caption + "'");
        }
        const double x = kPlotLeft + static_cast<double>(run_start) * x_per_frame;
        const double w = static_cast<double>(t - run_start) * x_per_frame;
        svg += "    <rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
               "\" height=\"" + fmt(kRibbonHeight) + "\" fill=\"" +
               std::string(kPalette[static_cast<std::size_t>(label)]) + "\"/>\n";
        run_start = t;
      }
    }
    svg += "  </g>\n";
    y += kRibbonHeight + kRibbonGap;
  }

  // Time axis in minutes.
  const double total_minutes = static_cast<double>(frames) / 60.0;
  const int step = pick_minute_step(total_minutes);
  svg += "  <g class=\"axis\">\n";
  svg += "    <line x1=\"" + fmt(kPlotLeft) + "\" y1=\"" + fmt(axis_y) + "\" x2=\"" +
         fmt(kPlotLeft + kPlotWidth) + "\" y2=\"" + fmt(axis_y) + "\" stroke=\"#333\"/>\n";
  for (int minute = 0; static_cast<double>(minute) <= total_minutes; minute += step) {
    const double x = kPlotLeft + minute * 60.0 * x_per_frame;
    svg += "    <line x1=\"" + fmt(x) + "\" y1=\"" + fmt(axis_y) + "\" x2=\"" + fmt(x) +
           "\" y2=\"" + fmt(axis_y + 5.0) + "\" stroke=\"#333\"/>\n";
    svg += "    <text x=\"" + fmt(x) + "\" y=\"" + fmt(axis_y + 18.0) +
           "\" text-anchor=\"middle\">" + std::to_string(minute) + "</text>\n";
  }
  svg += "    <text x=\"" + fmt(kPlotLeft + kPlotWidth) + "\" y=\"" + fmt(axis_y + 18.0) +
         "\" text-anchor=\"end\">min</text>\n";
  svg += "  </g>\n";

  // Phase legend.
  svg += "  <g class=\"legend\">\n";
  double lx = kPlotLeft;
  for (int p = 0; p < kNumPhases; ++p) {
    svg += "    <rect x=\"" + fmt(lx) + "\" y=\"" + fmt(legend_y) +
           "\" width=\"12\" height=\"12\" fill=\"" +
           std::string(kPalette[static_cast<std::size_t>(p)]) + "\"/>\n";
    svg += "    <text x=\"" + fmt(lx + 16.0) + "\" y=\"" + fmt(legend_y + 10.0) + "\">" +
           escape_xml(phase_name(p)) + "</text>\n";
    lx += 16.0 + 7.2 * static_cast<double>(phase_name(p).size()) + 18.0;
  }
  svg += "  </g>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace phasedet
