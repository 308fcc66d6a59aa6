#include "spcpool/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace spcpool {

namespace {

constexpr int kWidth = 1000;
constexpr int kPanelHeight = 340;
constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 34.0;

const char* kSeriesColor = "#39648c";
const char* kAlarmColor = "#c42f2f";
const char* kLimitColor = "#c42f2f";
const char* kCenterColor = "#777777";
const char* kLateColor = "#d87c00";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
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

// Maps data coordinates of one chart panel into the SVG viewport.
class Panel {
 public:
  Panel(double y_offset, double x_min, double x_max, double y_min, double y_max)
      : y_offset_(y_offset), x_min_(x_min), x_max_(x_max) {
    double pad = (y_max - y_min) * 0.06;
    if (pad <= 0.0) pad = std::max(1e-9, std::abs(y_max) * 0.1 + 0.1);
    y_min_ = y_min - pad;
    y_max_ = y_max + pad;
  }

  double x(double v) const {
    double span = x_max_ - x_min_;
    if (span <= 0.0) span = 1.0;
    return kMarginLeft + (v - x_min_) / span * (kWidth - kMarginLeft - kMarginRight);
  }
  double y(double v) const {
    double span = y_max_ - y_min_;
    return y_offset_ + kMarginTop +
           (y_max_ - v) / span * (kPanelHeight - kMarginTop - kMarginBottom);
  }

  void frame(std::string& out, const std::string& title) const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" "
                  "stroke=\"#999\"/>\n",
                  kMarginLeft, y_offset_ + kMarginTop, kWidth - kMarginLeft - kMarginRight,
                  kPanelHeight - kMarginTop - kMarginBottom);
    out += buf;
    out += "<text x=\"" + num(kMarginLeft) + "\" y=\"" + num(y_offset_ + kMarginTop - 10) +
           "\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) + "</text>\n";
    // y ticks
    for (int t = 0; t <= 4; ++t) {
      double v = y_min_ + (y_max_ - y_min_) * t / 4.0;
      out += "<text x=\"" + num(kMarginLeft - 6) + "\" y=\"" + num(y(v) + 4) +
             "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" + num(v) +
             "</text>\n";
    }
  }

  void hline(std::string& out, double v, const char* color, bool dashed,
             const std::string& label) const {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\"%s/>\n",
                  kMarginLeft, y(v), kWidth - kMarginRight, y(v), color,
                  dashed ? " stroke-dasharray=\"6,4\"" : "");
    out += buf;
    if (!label.empty())
      out += "<text x=\"" + num(kWidth - kMarginRight - 2) + "\" y=\"" + num(y(v) - 3) +
             "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\" fill=\"" +
             color + "\">" + escape(label) + "</text>\n";
  }

  void series(std::string& out, const Eigen::VectorXd& values, const std::vector<bool>& flags,
              double x0 = 0.0) const {
    std::string pts;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      pts += num(x(x0 + static_cast<double>(i)));
      pts += ',';
      pts += num(y(values[i]));
      pts += ' ';
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + kSeriesColor +
           "\" stroke-width=\"1\"/>\n";
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      bool flagged = static_cast<std::size_t>(i) < flags.size() &&
                     flags[static_cast<std::size_t>(i)];
      char buf[160];
      std::snprintf(buf, sizeof buf, "<circle cx=\"%g\" cy=\"%g\" r=\"%g\" fill=\"%s\"/>\n",
                    x(x0 + static_cast<double>(i)), y(values[i]), flagged ? 3.5 : 2.0,
                    flagged ? kAlarmColor : kSeriesColor);
      out += buf;
    }
  }

  void polyline(std::string& out, const Eigen::VectorXd& values, const char* color, bool dashed,
                double x0 = 0.0) const {
    std::string pts;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      pts += num(x(x0 + static_cast<double>(i)));
      pts += ',';
      pts += num(y(values[i]));
      pts += ' ';
    }
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\"";
    if (dashed) out += " stroke-dasharray=\"6,4\"";
    out += "/>\n";
  }

 private:
  double y_offset_;
  double x_min_, x_max_;
  double y_min_, y_max_;
};

std::string svg_open(int height) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                kWidth, height, kWidth, height);
  return buf;
}

}  // namespace

std::string render_ir_svg(const IrChart& chart, const std::string& title) {
  double n = static_cast<double>(chart.values.size());
  double lo = std::min(chart.values.minCoeff(), chart.limits.lcl);
  double hi = std::max(chart.values.maxCoeff(), chart.limits.ucl);

  std::string out = svg_open(2 * kPanelHeight);
  Panel top(0.0, 0.0, n - 1.0, lo, hi);
  top.frame(out, title + " - individuals");
  top.hline(out, chart.limits.center_line, kCenterColor, false, "CL " + num(chart.limits.center_line));
  top.hline(out, chart.limits.ucl, kLimitColor, true, "UCL " + num(chart.limits.ucl));
  top.hline(out, chart.limits.lcl, kLimitColor, true, "LCL " + num(chart.limits.lcl));
  top.series(out, chart.values, chart.flags);

  if (chart.moving_ranges.size() > 0) {
    double mr_hi = std::max(chart.moving_ranges.maxCoeff(), chart.limits.mr_ucl);
    Panel bottom(kPanelHeight, 0.0, n - 1.0, 0.0, mr_hi);
    bottom.frame(out, "moving range");
    bottom.hline(out, chart.limits.mr_bar, kCenterColor, false, "MRbar " + num(chart.limits.mr_bar));
    bottom.hline(out, chart.limits.mr_ucl, kLimitColor, true, "UCL " + num(chart.limits.mr_ucl));
    bottom.series(out, chart.moving_ranges, chart.mr_flags, 1.0);
  }
  out += "</svg>\n";
  return out;
}

std::string render_ewma_svg(const EwmaChart& chart, const std::string& title) {
  double n = static_cast<double>(chart.z.size());
  double lo = std::min(chart.z.minCoeff(), chart.lcl.minCoeff());
  double hi = std::max(chart.z.maxCoeff(), chart.ucl.maxCoeff());

  std::string out = svg_open(kPanelHeight);
  Panel panel(0.0, 0.0, n - 1.0, lo, hi);
  panel.frame(out, title + " - EWMA (lambda=" + num(chart.lambda) + ")");
  panel.hline(out, chart.params.center, kCenterColor, false, "CL " + num(chart.params.center));
  panel.polyline(out, chart.ucl, kLimitColor, true);
  panel.polyline(out, chart.lcl, kLimitColor, true);
  panel.series(out, chart.z, chart.flags);
  out += "</svg>\n";
  return out;
}

std::string render_facet_svg(const std::vector<FacetPoint>& points,
                             const std::string& factor_name, const std::string& title,
                             std::optional<Date> threshold) {
  std::map<std::string, int> level_pos;
  for (const auto& p : points) level_pos.emplace(p.level, 0);
  int next = 0;
  for (auto& [level, pos] : level_pos) pos = next++;

  double lo = 0.0, hi = 0.0;
  for (const auto& p : points) {
    lo = std::min(lo, p.value);
    hi = std::max(hi, p.value);
  }

  std::string out = svg_open(kPanelHeight + 40);
  Panel panel(0.0, -0.5, static_cast<double>(next) - 0.5, lo, hi);
  std::string heading = title + " by " + factor_name;
  if (threshold) heading += " (periods split at " + format_date(*threshold) + ")";
  panel.frame(out, heading);
  panel.hline(out, 0.0, kCenterColor, false, "");

  std::map<std::string, int> jitter;
  for (const auto& p : points) {
    int pos = level_pos[p.level];
    int j = jitter[p.level]++ % 9 - 4;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%g\" cy=\"%g\" r=\"2.4\" fill=\"%s\" fill-opacity=\"0.75\"/>\n",
                  panel.x(static_cast<double>(pos)) + 2.5 * j, panel.y(p.value),
                  p.late_period ? kLateColor : kSeriesColor);
    out += buf;
  }
  for (const auto& [level, pos] : level_pos) {
    out += "<text x=\"" + num(panel.x(static_cast<double>(pos))) + "\" y=\"" +
           num(static_cast<double>(kPanelHeight) - 8) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           escape(level) + "</text>\n";
  }
  out += "<text x=\"" + num(kMarginLeft) + "\" y=\"" + num(static_cast<double>(kPanelHeight) + 24) +
         "\" font-family=\"sans-serif\" font-size=\"11\">early period: " +
         std::string(kSeriesColor) + ", late period: " + kLateColor + "</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace spcpool
