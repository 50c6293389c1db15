#pragma once

// Minimal self-contained SVG line charts.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace qclone {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  /// Draw point markers on top of the polyline (for measured data).
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// 800x600 viewBox, linear axes spanning the data extent plus a 5% margin,
/// one <polyline> per series. Throws InvalidArgument on empty series or
/// non-finite coordinates.
std::string render_svg(const PlotSpec& spec);

void write_svg(const PlotSpec& spec, const std::filesystem::path& path);

}  // namespace qclone
