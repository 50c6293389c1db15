#include "qclone/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qclone/errors.hpp"
#include "qclone/format.hpp"

namespace qclone {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 600.0;
constexpr double kLeft = 80.0, kRight = 20.0, kTop = 50.0, kBottom = 60.0;
constexpr int kTicks = 5;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Data extent widened by 5% on each side; a flat range gets unit width.
  void pad() {
    double span = hi - lo;
    if (span <= 0.0) span = std::max(std::abs(lo), 1.0);
    lo -= 0.05 * span;
    hi += 0.05 * span;
  }
};

std::string num(double v) { return format_short(v); }

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  if (spec.series.empty()) throw InvalidArgument("plot has no series");
  Range xr, yr;
  for (const auto& s : spec.series) {
    if (s.points.empty()) throw InvalidArgument("series '" + s.name + "' is empty");
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw InvalidArgument("series '" + s.name + "' has a non-finite coordinate");
      }
      xr.include(x);
      yr.include(y);
    }
  }
  xr.pad();
  yr.pad();

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" "
         "height=\"600\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n"
      << "  <text x=\"400\" y=\"30\" text-anchor=\"middle\" font-size=\"18\">"
      << escape(spec.title) << "</text>\n"
      << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / kTicks;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / kTicks;
    out << "  <text x=\"" << num(px(xv)) << "\" y=\"" << kHeight - kBottom + 20
        << "\" text-anchor=\"middle\" font-size=\"12\">" << num(xv) << "</text>\n"
        << "  <text x=\"" << kLeft - 8 << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">" << num(yv) << "</text>\n";
  }
  out << "  <text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.x_label) << "</text>\n"
      << "  <text x=\"20\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 "
      << kTop + plot_h / 2 << ")\">" << escape(spec.y_label) << "</text>\n";

  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.markers ? " stroke-dasharray=\"2 6\"" : "") << " points=\"";
    for (std::size_t j = 0; j < s.points.size(); ++j) {
      out << (j ? " " : "") << num(px(s.points[j].first)) << ',' << num(py(s.points[j].second));
    }
    out << "\"><title>" << escape(s.name) << "</title></polyline>\n";
    if (s.markers) {
      for (const auto& [x, y] : s.points) {
        out << "  <circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y))
            << "\" r=\"4\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = kTop + 18.0 + 18.0 * static_cast<double>(i);
    out << "  <line x1=\"" << kLeft + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + 40
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "  <text x=\"" << kLeft + 46 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
        << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_svg(const PlotSpec& spec, const std::filesystem::path& path) {
  const std::string text = render_svg(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

}  // namespace qclone
