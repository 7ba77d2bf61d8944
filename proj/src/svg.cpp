#include "distlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace distlab {
namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 440;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double transform(double v, bool log_axis) { return log_axis ? std::log10(v) : v; }

}  // namespace

std::string render_svg(const TrajectoryLog& log, const PlotSpec& spec) {
  if (log.empty()) throw std::invalid_argument("render_svg: empty log");
  if (spec.y_columns.empty()) throw std::invalid_argument("render_svg: no y columns");
  const std::vector<double> xs_raw = log.series(spec.x_column);
  std::vector<std::vector<double>> ys_raw;
  for (const auto& name : spec.y_columns) ys_raw.push_back(log.series(name));

  // Collect finite (and positive, for log axes) points per series.
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  std::vector<std::vector<std::pair<double, double>>> series(ys_raw.size());
  for (std::size_t s = 0; s < ys_raw.size(); ++s) {
    for (std::size_t i = 0; i < xs_raw.size(); ++i) {
      const double x = xs_raw[i], y = ys_raw[s][i];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (spec.log_x && !(x > 0.0)) continue;
      if (spec.log_y && !(y > 0.0)) continue;
      const double tx = transform(x, spec.log_x), ty = transform(y, spec.log_y);
      series[s].emplace_back(tx, ty);
      x_lo = std::min(x_lo, tx);
      x_hi = std::max(x_hi, tx);
      y_lo = std::min(y_lo, ty);
      y_hi = std::max(y_hi, ty);
    }
  }
  if (!(x_lo <= x_hi) || !(y_lo <= y_hi))
    throw std::invalid_argument("render_svg: no plottable points");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto px = [&](double tx) { return kMarginLeft + (tx - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto py = [&](double ty) {
    return kHeight - kMarginBottom - (ty - y_lo) / (y_hi - y_lo) * plot_h;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << spec.title << "</text>\n";

  // frame
  out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << fmt(plot_w)
      << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // ticks
  for (int k = 0; k <= 4; ++k) {
    const double tx = x_lo + (x_hi - x_lo) * k / 4.0;
    const double ty = y_lo + (y_hi - y_lo) * k / 4.0;
    const double vx = spec.log_x ? std::pow(10.0, tx) : tx;
    const double vy = spec.log_y ? std::pow(10.0, ty) : ty;
    out << "<line x1=\"" << fmt(px(tx)) << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
        << fmt(px(tx)) << "\" y2=\"" << kHeight - kMarginBottom + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(px(tx)) << "\" y=\"" << kHeight - kMarginBottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(vx)
        << "</text>\n";
    out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << fmt(py(ty)) << "\" x2=\""
        << kMarginLeft << "\" y2=\"" << fmt(py(ty)) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << fmt(py(ty) + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(vy)
        << "</text>\n";
  }

  // axis labels
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << spec.x_column
      << (spec.log_x ? " (log)" : "") << "</text>\n";
  std::string y_label;
  for (std::size_t s = 0; s < spec.y_columns.size(); ++s)
    y_label += (s ? ", " : "") + spec.y_columns[s];
  out << "<text x=\"12\" y=\"" << kMarginTop - 10
      << "\" font-size=\"13\" font-family=\"sans-serif\">" << y_label
      << (spec.log_y ? " (log)" : "") << "</text>\n";

  // polylines
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [tx, ty] : series[s]) out << fmt(px(tx)) << ',' << fmt(py(ty)) << ' ';
    out << "\"/>\n";
  }

  // legend for multiple series
  if (spec.y_columns.size() > 1) {
    for (std::size_t s = 0; s < spec.y_columns.size(); ++s) {
      const double ly = kMarginTop + 16.0 + 16.0 * static_cast<double>(s);
      out << "<line x1=\"" << kWidth - kMarginRight - 110 << "\" y1=\"" << fmt(ly - 4)
          << "\" x2=\"" << kWidth - kMarginRight - 90 << "\" y2=\"" << fmt(ly - 4)
          << "\" stroke=\"" << kPalette[s % 6] << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << kWidth - kMarginRight - 84 << "\" y=\"" << fmt(ly)
          << "\" font-size=\"12\" font-family=\"sans-serif\">" << spec.y_columns[s]
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace distlab
