#pragma once

// Minimal SVG scatter plot: points colored by an integer class through a
// fixed 16-color palette (class mod 16).

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "icarec/error.hpp"

namespace icarec::svg {

inline constexpr std::array<const char*, 16> kPalette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd"};

struct ScatterOptions {
  int width = 640, height = 640, margin = 40;
  double radius = 2.0;
  std::string title;
  std::string x_label = "pc1", y_label = "pc2";
};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string scatter(const std::vector<double>& x, const std::vector<double>& y, const std::vector<std::size_t>& cls,
                           const ScatterOptions& opt = {}) {
  if (x.size() != y.size() || x.size() != cls.size()) throw ShapeError("svg scatter: column lengths differ");
  if (x.empty()) throw ConfigError("svg scatter: no points");
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  const double xr = *xhi > *xlo ? *xhi - *xlo : 1.0, yr = *yhi > *ylo ? *yhi - *ylo : 1.0;
  const double pw = opt.width - 2.0 * opt.margin, ph = opt.height - 2.0 * opt.margin;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
     << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << opt.margin << "\" y=\"" << opt.margin << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  if (!opt.title.empty()) {
    os << "<text x=\"" << opt.width / 2 << "\" y=\"" << opt.margin / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << escape(opt.title) << "</text>\n";
  }
  os << "<text x=\"" << opt.width / 2 << "\" y=\"" << opt.height - 8
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(opt.x_label) << "</text>\n";
  os << "<text x=\"12\" y=\"" << opt.height / 2 << "\" transform=\"rotate(-90 12 " << opt.height / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(opt.y_label) << "</text>\n";
  char buf[160];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double px = opt.margin + (x[i] - *xlo) / xr * pw;
    const double py = opt.margin + ph - (y[i] - *ylo) / yr * ph;
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.1f\" fill=\"%s\"/>\n", px, py, opt.radius,
                  kPalette[cls[i] % kPalette.size()]);
    os << buf;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace icarec::svg
