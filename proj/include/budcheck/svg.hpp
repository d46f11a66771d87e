#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace budcheck::svg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Series {
  std::string label;
  std::string color = "#1f77b4";
  std::vector<Point> points;
  bool line = true;
  bool markers = false;
};

/// Shaded region between a lower and an upper boundary (confidence bands).
struct Band {
  std::string color = "#bbbbbb";
  std::vector<Point> lower;
  std::vector<Point> upper;
};

/// Minimal batch plotter. Every series' numeric data is also embedded as
/// an XML comment so emitted figures stay machine-checkable.
class Plot {
 public:
  Plot(std::string title, std::string x_label, std::string y_label);

  void set_log_x(bool log_x) { log_x_ = log_x; }
  void add_series(Series series) { series_.push_back(std::move(series)); }
  void add_band(Band band) { bands_.push_back(std::move(band)); }

  void write(const std::filesystem::path& path) const;

 private:
  std::string title_;
  std::string x_label_;
  std::string y_label_;
  bool log_x_ = false;
  std::vector<Series> series_;
  std::vector<Band> bands_;
};

/// Cycle-ordered palette used across figures.
const std::string& palette_color(std::size_t index);

}  // namespace budcheck::svg
