#include "geoprobe/svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace geoprobe::svg {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  std::string s(buf, end);
  return s == "-0.00" ? "0.00" : s;
}

std::string tick(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, end);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
      const double pad = std::max(0.5, std::abs(hi) * 0.05);
      lo -= pad;
      hi += pad;
    }
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void frame(std::ostringstream& os, const std::string& title, const Range& xr, const Range& yr,
           const std::string& x_label, const std::string& y_label) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  os << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y1) << "\" width=\"" << fixed(x1 - x0) << "\" height=\""
     << fixed(y0 - y1) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double px = xr.map(fx, x0, x1);
    const double py = yr.map(fy, y0, y1);
    os << "<line x1=\"" << fixed(px) << "\" y1=\"" << fixed(y0) << "\" x2=\"" << fixed(px) << "\" y2=\""
       << fixed(y0 + 5) << "\" stroke=\"#444\"/>";
    os << "<text x=\"" << fixed(px) << "\" y=\"" << fixed(y0 + 18) << "\" text-anchor=\"middle\">" << tick(fx)
       << "</text>\n";
    os << "<line x1=\"" << fixed(x0 - 5) << "\" y1=\"" << fixed(py) << "\" x2=\"" << fixed(x0) << "\" y2=\""
       << fixed(py) << "\" stroke=\"#444\"/>";
    os << "<text x=\"" << fixed(x0 - 8) << "\" y=\"" << fixed(py + 4) << "\" text-anchor=\"end\">" << tick(fy)
       << "</text>\n";
  }
  if (!x_label.empty()) {
    os << "<text x=\"" << fixed((x0 + x1) / 2) << "\" y=\"" << fixed(kHeight - 10) << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n";
  }
  if (!y_label.empty()) {
    os << "<text transform=\"translate(16 " << fixed((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(y_label) << "</text>\n";
  }
}

void legend(std::ostringstream& os, std::size_t i, const std::string& name) {
  const double y = kTop + 10 + 18.0 * static_cast<double>(i);
  const double x = kWidth - kRight + 12;
  os << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
     << kPalette[i % kPalette.size()] << "\"/>";
  os << "<text x=\"" << fixed(x + 16) << "\" y=\"" << fixed(y) << "\">" << escape(name) << "</text>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& xs, const std::vector<LineSeries>& series) {
  Range xr, yr;
  for (double x : xs) xr.add(x);
  for (const auto& s : series) {
    for (const auto& v : s.values) {
      if (v) yr.add(*v);
    }
  }
  xr.finish();
  yr.finish();

  std::ostringstream os;
  frame(os, title, xr, yr, x_label, y_label);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    std::string d;
    bool pen_down = false;
    for (std::size_t k = 0; k < xs.size() && k < series[i].values.size(); ++k) {
      const auto& v = series[i].values[k];
      if (!v) {
        pen_down = false;
        continue;
      }
      d += (pen_down ? " L" : " M") + fixed(xr.map(xs[k], x0, x1)) + ' ' + fixed(yr.map(*v, y0, y1));
      pen_down = true;
      os << "<circle cx=\"" << fixed(xr.map(xs[k], x0, x1)) << "\" cy=\"" << fixed(yr.map(*v, y0, y1))
         << "\" r=\"2.5\" fill=\"" << color << "\"/>";
    }
    os << "\n<path d=\"" << d.substr(d.empty() ? 0 : 1) << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.8\"/>\n";
    legend(os, i, series[i].name);
  }
  os << "</svg>\n";
  return os.str();
}

std::string path_plot(const std::string& title, const std::vector<PathSeries>& paths) {
  Range xr, yr;
  for (const auto& p : paths) {
    for (const auto& [x, y] : p.points) {
      xr.add(x);
      yr.add(y);
    }
  }
  xr.finish();
  yr.finish();

  std::ostringstream os;
  frame(os, title, xr, yr, "PC1", "PC2");
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    std::string d;
    for (std::size_t k = 0; k < paths[i].points.size(); ++k) {
      const double px = xr.map(paths[i].points[k].first, x0, x1);
      const double py = yr.map(paths[i].points[k].second, y0, y1);
      d += (k == 0 ? "M" : " L") + fixed(px) + ' ' + fixed(py);
      os << "<circle cx=\"" << fixed(px) << "\" cy=\"" << fixed(py) << "\" r=\"" << (k == 0 ? "4.5" : "2.5")
         << "\" fill=\"" << color << "\"/>";
    }
    os << "\n<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    legend(os, i, paths[i].name);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace geoprobe::svg
