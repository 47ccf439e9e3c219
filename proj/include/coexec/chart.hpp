#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "coexec/core.hpp"
#include "coexec/error.hpp"
#include "coexec/metrics.hpp"

namespace coexec {

namespace chart_detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c); break;
    }
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline const char* color(std::size_t i) {
  static const char* palette[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f",
                                  "#956cb4", "#8c613c", "#dc7ec0", "#797979"};
  return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace chart_detail

/// Horizontal-time chart: one lane per device with a mark per package
/// (width = duration, height scaled by size_wg), plus a stacked bar of the
/// per-device work shares underneath.
inline std::string render_svg(const ExecutionTrace& trace) {
  using namespace chart_detail;
  if (trace.packages.empty()) throw Error(ErrorCode::MalformedTrace, "trace has no packages");

  constexpr double width = 960.0;
  constexpr double margin_left = 110.0;
  constexpr double margin_right = 20.0;
  constexpr double lane_height = 46.0;
  constexpr double lane_gap = 8.0;
  constexpr double top = 54.0;
  const double plot_width = width - margin_left - margin_right;

  const std::size_t lanes = trace.devices.size();
  const double share_bar_top = top + lanes * (lane_height + lane_gap) + 36.0;
  const double height = share_bar_top + 26.0 + 40.0;

  double t_max = trace.t_total_ms;
  std::uint64_t max_size = 1;
  for (const auto& pkg : trace.packages) {
    t_max = std::max(t_max, pkg.t_end_ms);
    max_size = std::max(max_size, pkg.size_wg);
  }
  if (t_max <= 0.0) t_max = 1.0;
  const auto x_of = [&](double t) { return margin_left + t / t_max * plot_width; };

  std::map<std::string, std::size_t> lane_of;
  for (std::size_t i = 0; i < trace.devices.size(); ++i) lane_of[trace.devices[i].id] = i;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << margin_left << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">"
      << xml_escape(trace.program.kernel) << " — " << xml_escape(trace.scheduler) << " ("
      << clock_mode_name(trace.clock_mode) << " clock, t_total " << fmt(trace.t_total_ms)
      << " ms)</text>\n";

  // time axis ticks
  for (int tick = 0; tick <= 10; ++tick) {
    const double t = t_max * tick / 10.0;
    const double x = x_of(t);
    svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << top - 8 << "\" x2=\"" << fmt(x) << "\" y2=\""
        << share_bar_top - 24 << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt(x) << "\" y=\"" << top - 12
        << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\" fill=\"#555555\">"
        << fmt(t) << "</text>\n";
  }

  for (std::size_t i = 0; i < trace.devices.size(); ++i) {
    const double lane_top = top + i * (lane_height + lane_gap);
    svg << "<text x=\"8\" y=\"" << fmt(lane_top + lane_height / 2 + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(trace.devices[i].id)
        << "</text>\n";
    svg << "<line x1=\"" << margin_left << "\" y1=\"" << fmt(lane_top + lane_height) << "\" x2=\""
        << width - margin_right << "\" y2=\"" << fmt(lane_top + lane_height)
        << "\" stroke=\"#bbbbbb\" stroke-width=\"1\"/>\n";
  }

  for (const auto& pkg : trace.packages) {
    const std::size_t lane = lane_of.at(pkg.device_id);
    const double lane_top = top + lane * (lane_height + lane_gap);
    const double h = std::max(2.0, lane_height * static_cast<double>(pkg.size_wg) /
                                       static_cast<double>(max_size));
    const double x = x_of(pkg.t_start_ms);
    const double w = std::max(0.75, x_of(pkg.t_end_ms) - x);
    svg << "<rect class=\"pkg\" x=\"" << fmt(x) << "\" y=\"" << fmt(lane_top + lane_height - h)
        << "\" width=\"" << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"" << color(lane)
        << "\" fill-opacity=\"0.85\"><title>seq " << pkg.seq << ": wg [" << pkg.offset_wg << ", "
        << pkg.end_wg() << ") on " << xml_escape(pkg.device_id) << ", " << fmt(pkg.t_start_ms)
        << "-" << fmt(pkg.t_end_ms) << " ms</title></rect>\n";
  }

  // work-share stacked bar
  const auto share = work_share_of(trace);
  svg << "<text x=\"8\" y=\"" << fmt(share_bar_top - 6)
      << "\" font-family=\"sans-serif\" font-size=\"12\">work share</text>\n";
  double cursor = margin_left;
  for (std::size_t i = 0; i < trace.devices.size(); ++i) {
    const auto it = share.find(trace.devices[i].id);
    if (it == share.end()) continue;
    const double w = it->second * plot_width;
    svg << "<rect class=\"share\" x=\"" << fmt(cursor) << "\" y=\"" << fmt(share_bar_top)
        << "\" width=\"" << fmt(w) << "\" height=\"22\" fill=\"" << color(i) << "\"/>\n";
    if (w > 36.0) {
      char label[64];
      std::snprintf(label, sizeof(label), "%s %.1f%%", trace.devices[i].id.c_str(), it->second * 100.0);
      svg << "<text x=\"" << fmt(cursor + w / 2) << "\" y=\"" << fmt(share_bar_top + 15)
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" fill=\"#ffffff\">"
          << xml_escape(label) << "</text>\n";
    }
    cursor += w;
  }

  svg << "</svg>\n";
  return svg.str();
}

inline void save_svg(const ExecutionTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << render_svg(trace);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace coexec
