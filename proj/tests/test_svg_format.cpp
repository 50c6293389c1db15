#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <regex>
#include <string>

#include "qclone/errors.hpp"
#include "qclone/format.hpp"
#include "qclone/svg_plot.hpp"

using namespace qclone;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(FormatExact, RoundTripsProperty) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5000; ++i) {
    double x;
    const auto bits = rng();
    std::memcpy(&x, &bits, sizeof x);
    if (!std::isfinite(x)) continue;
    EXPECT_EQ(std::strtod(format_exact(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_exact(0.1), "0.1");
  EXPECT_EQ(format_exact(std::numeric_limits<double>::infinity()), "inf");
}

TEST(FormatShort, SixSignificantDigits) {
  EXPECT_EQ(format_short(5.0 / 6.0), "0.833333");
  EXPECT_EQ(format_short(1.0), "1");
}

TEST(Svg, OnePolylinePerSeriesAndFixedViewBox) {
  PlotSpec spec{"F vs mu", "mu_in", "F & co", {}};
  spec.series.push_back({"data", {{0.1, 0.6}, {1.0, 0.82}}, true});
  spec.series.push_back({"Q=0", {{0.1, 0.52}, {1.0, 0.75}}});
  spec.series.push_back({"Q=1", {{0.1, 0.55}, {1.0, 0.85}}});
  const auto svg = render_svg(spec);
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  EXPECT_EQ(count(svg, "</polyline>"), 3u);
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
  EXPECT_NE(svg.find("F &amp; co"), std::string::npos);
  EXPECT_EQ(count(svg, "<circle"), 2u);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(Svg, PointsStayInsideCanvas) {
  PlotSpec spec{"t", "x", "y", {{"s", {{-5.0, 1e6}, {3.0, -2e6}, {0.0, 0.0}}}}};
  const auto svg = render_svg(spec);
  const std::regex coord(R"((-?[0-9.e+-]+),(-?[0-9.e+-]+))");
  const auto points_at = svg.find("points=\"");
  const auto points = svg.substr(points_at + 8, svg.find('"', points_at + 8) - points_at - 8);
  for (std::sregex_iterator it(points.begin(), points.end(), coord), end; it != end; ++it) {
    const double x = std::stod((*it)[1]), y = std::stod((*it)[2]);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 800.0);
    EXPECT_GE(y, 0.0);
    EXPECT_LE(y, 600.0);
  }
}

TEST(Svg, RejectsInvalidSpecs) {
  EXPECT_THROW(render_svg({"t", "x", "y", {}}), InvalidArgument);
  EXPECT_THROW(render_svg({"t", "x", "y", {{"empty", {}}}}), InvalidArgument);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(render_svg({"t", "x", "y", {{"bad", {{1.0, nan}}}}}), InvalidArgument);
}
