#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phsobs/dense.hpp"

namespace phsobs {

namespace fs = std::filesystem;

// Shortest representation that survives a parse round trip.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Writes through a temporary sibling and renames, so readers never observe a
// half-written file.
inline void atomic_write(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StructuralError("cannot write " + tmp.string());
    out << content;
    if (!out) throw StructuralError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) body_ << ',';
      body_ << header[i];
    }
    body_ << '\n';
  }
  void row(const std::vector<double>& values) {
    if (values.size() != cols_)
      throw StructuralError("csv row width does not match header");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) body_ << ',';
      body_ << fmt_double(values[i]);
    }
    body_ << '\n';
  }
  std::string str() const { return body_.str(); }

 private:
  std::size_t cols_;
  std::ostringstream body_;
};

// Dense export in the matrix-market array format (column major).
inline std::string matrix_market(const Mat& M, const std::string& comment = "") {
  std::ostringstream os;
  os << "%%MatrixMarket matrix array real general\n";
  if (!comment.empty()) os << "% " << comment << '\n';
  os << M.rows() << ' ' << M.cols() << '\n';
  for (int c = 0; c < M.cols(); ++c)
    for (int r = 0; r < M.rows(); ++r) os << fmt_double(M(r, c)) << '\n';
  return os.str();
}

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

// Self-contained line plot. With log_y the values are clamped at 1e-16 and
// drawn on a log10 axis.
inline std::string render_line_plot(const std::string& title,
                                    const std::string& xlabel,
                                    const std::string& ylabel,
                                    const std::vector<PlotSeries>& series,
                                    bool log_y = false) {
  const double W = 860, H = 520, ML = 78, MR = 24, MT = 46, MB = 56;
  const double PW = W - ML - MR, PH = H - MT - MB;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};
  auto tx = [&](double v) { return v; };
  auto ty = [&](double v) {
    return log_y ? std::log10(std::max(v, 1e-16)) : v;
  };

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) { return ML + (tx(v) - xmin) / (xmax - xmin) * PW; };
  auto py = [&](double v) { return MT + (ymax - ty(v)) / (ymax - ymin) * PH; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << ' '
     << H << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-size=\"16\">"
     << detail::svg_escape(title) << "</text>\n";

  const int nt = 5;
  for (int k = 0; k <= nt; ++k) {
    double fx = xmin + (xmax - xmin) * k / nt;
    double gx = ML + PW * k / nt;
    os << "<line x1=\"" << gx << "\" y1=\"" << MT << "\" x2=\"" << gx
       << "\" y2=\"" << MT + PH << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << gx << "\" y=\"" << MT + PH + 18
       << "\" text-anchor=\"middle\">" << detail::tick_label(fx) << "</text>\n";
    double fy = ymin + (ymax - ymin) * k / nt;
    double gy = MT + PH - PH * k / nt;
    os << "<line x1=\"" << ML << "\" y1=\"" << gy << "\" x2=\"" << ML + PW
       << "\" y2=\"" << gy << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << ML - 8 << "\" y=\"" << gy + 4
       << "\" text-anchor=\"end\">"
       << detail::tick_label(log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  os << "<rect x=\"" << ML << "\" y=\"" << MT << "\" width=\"" << PW
     << "\" height=\"" << PH << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  os << "<text x=\"" << ML + PW / 2 << "\" y=\"" << H - 14
     << "\" text-anchor=\"middle\">" << detail::svg_escape(xlabel)
     << "</text>\n";
  os << "<text x=\"20\" y=\"" << MT + PH / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << MT + PH / 2
     << ")\">" << detail::svg_escape(ylabel) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 6];
    std::size_t stride = std::max<std::size_t>(1, s.x.size() / 2000);
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); i += stride)
      os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    if ((s.x.size() - 1) % stride != 0)
      os << px(s.x.back()) << ',' << py(s.y.back());
    os << "\"/>\n";
    double ly = MT + 16 + 18.0 * si;
    os << "<line x1=\"" << ML + PW - 150 << "\" y1=\"" << ly << "\" x2=\""
       << ML + PW - 120 << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ML + PW - 112 << "\" y=\"" << ly + 4 << "\">"
       << detail::svg_escape(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace phsobs
