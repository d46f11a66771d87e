#include "budcheck/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "budcheck/errors.hpp"
#include "budcheck/session.hpp"

namespace budcheck::svg {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 160.0;  // legend space
constexpr double kMarginTop = 44.0;
constexpr double kMarginBottom = 56.0;

const std::vector<std::string> kPalette = {
    "#1f77b4", "#d62728", "#ff7f0e", "#9467bd",
    "#2ca02c", "#17becf", "#8c564b", "#e377c2",
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void pad() {
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      const double margin = 0.05 * (hi - lo);
      lo -= margin;
      hi += margin;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

std::string escape(const std::string& s) {
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

std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw_step = span / 6.0;
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw_step)));
  double step = magnitude;
  for (double mult : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (magnitude * mult >= raw_step) {
      step = magnitude * mult;
      break;
    }
  }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  }
  return ticks;
}

std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  const int d0 = static_cast<int>(std::floor(std::log10(lo)));
  const int d1 = static_cast<int>(std::ceil(std::log10(hi)));
  for (int d = d0; d <= d1; ++d) {
    for (double mult : {1.0, 2.0, 5.0}) {
      const double v = mult * std::pow(10.0, d);
      if (v >= lo && v <= hi) ticks.push_back(v);
    }
  }
  return ticks;
}

std::string tick_label(double v) {
  std::ostringstream out;
  if (v != 0.0 && (std::abs(v) >= 10000.0 || std::abs(v) < 0.01)) {
    out.precision(3);
  } else {
    out.precision(4);
  }
  out << v;
  return out.str();
}

}  // namespace

const std::string& palette_color(std::size_t index) {
  return kPalette[index % kPalette.size()];
}

Plot::Plot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void Plot::write(const std::filesystem::path& path) const {
  Range xr, yr;
  const auto expand_points = [&](const std::vector<Point>& points) {
    for (const auto& p : points) {
      xr.expand(log_x_ ? std::log10(p.x) : p.x);
      yr.expand(p.y);
    }
  };
  for (const auto& s : series_) expand_points(s.points);
  for (const auto& b : bands_) {
    expand_points(b.lower);
    expand_points(b.upper);
  }
  xr.pad();
  yr.pad();

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto to_x = [&](double v) {
    const double t = ((log_x_ ? std::log10(v) : v) - xr.lo) / (xr.hi - xr.lo);
    return kMarginLeft + t * plot_w;
  };
  const auto to_y = [&](double v) {
    const double t = (v - yr.lo) / (yr.hi - yr.lo);
    return kMarginTop + (1.0 - t) * plot_h;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kMarginLeft << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"16\" font-weight=\"bold\">"
      << escape(title_) << "</text>\n";

  // Embedded data for scraping.
  for (const auto& s : series_) {
    out << "<!-- series label=\"" << escape(s.label) << "\" points=\"";
    for (const auto& p : s.points) {
      out << session::format_double(p.x) << ':' << session::format_double(p.y) << ' ';
    }
    out << "\" -->\n";
  }

  // Axes and ticks.
  const double x0 = kMarginLeft;
  const double x1 = kMarginLeft + plot_w;
  const double y0 = kMarginTop + plot_h;
  const double y1 = kMarginTop;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n";

  const std::vector<double> xticks =
      log_x_ ? log_ticks(std::pow(10.0, xr.lo), std::pow(10.0, xr.hi))
             : linear_ticks(xr.lo, xr.hi);
  for (double v : xticks) {
    const double px = to_x(v);
    out << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\""
        << y0 + 5 << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y1
        << "\" stroke=\"#eeeeee\"/>\n";
    out << "<text x=\"" << px << "\" y=\"" << y0 + 20
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
        << tick_label(v) << "</text>\n";
  }
  for (double v : linear_ticks(yr.lo, yr.hi)) {
    const double py = to_y(v);
    out << "<line x1=\"" << x0 - 5 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\""
        << py << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py
        << "\" stroke=\"#eeeeee\"/>\n";
    out << "<text x=\"" << x0 - 8 << "\" y=\"" << py + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
        << tick_label(v) << "</text>\n";
  }
  out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 14
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
      << escape(x_label_) << "</text>\n";
  out << "<text x=\"18\" y=\"" << (y0 + y1) / 2
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << (y0 + y1) / 2 << ")\">" << escape(y_label_) << "</text>\n";

  for (const auto& b : bands_) {
    if (b.lower.empty() || b.upper.empty()) continue;
    out << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.35\" stroke=\"none\" "
           "points=\"";
    for (const auto& p : b.lower) out << fmt(to_x(p.x)) << ',' << fmt(to_y(p.y)) << ' ';
    for (auto it = b.upper.rbegin(); it != b.upper.rend(); ++it) {
      out << fmt(to_x(it->x)) << ',' << fmt(to_y(it->y)) << ' ';
    }
    out << "\"/>\n";
  }

  for (const auto& s : series_) {
    if (s.line && s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.6\" points=\"";
      for (const auto& p : s.points) out << fmt(to_x(p.x)) << ',' << fmt(to_y(p.y)) << ' ';
      out << "\"/>\n";
    }
    if (s.markers || s.points.size() == 1) {
      for (const auto& p : s.points) {
        out << "<circle cx=\"" << fmt(to_x(p.x)) << "\" cy=\"" << fmt(to_y(p.y))
            << "\" r=\"2.6\" fill=\"" << s.color << "\"/>\n";
      }
    }
  }

  double legend_y = kMarginTop + 8.0;
  for (const auto& s : series_) {
    if (s.label.empty()) continue;
    out << "<line x1=\"" << x1 + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << x1 + 30
        << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << x1 + 36 << "\" y=\"" << legend_y + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label)
        << "</text>\n";
    legend_y += 16.0;
  }

  out << "</svg>\n";

  std::ofstream file(path, std::ios::trunc);
  if (!file) fail(errc::io, "cannot open " + path.string() + " for writing");
  file << out.str();
  if (!file) fail(errc::io, "write failed for " + path.string());
}

}  // namespace budcheck::svg
