#ifndef DLBC_RENDER_HPP_
#define DLBC_RENDER_HPP_

// SVG output: animated episode renders and metric curve plots. All numbers
// are printed with fixed precision so output bytes depend only on inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "dlbc/diversity.hpp"
#include "dlbc/env.hpp"
#include "dlbc/io.hpp"

namespace dlbc::render {

inline const std::vector<std::string>& group_palette() {
  static const std::vector<std::string> colors = {
      "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
  return colors;
}
inline constexpr const char* kEvaderColor = "#d62728";

inline std::string fixed(double v, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Maps arena coordinates to pixels; y grows upward in the arena.
struct ArenaView {
  double half_width = 1.0;
  int size_px = 600;
  double pad_px = 20.0;

  double scale() const { return (size_px - 2.0 * pad_px) / (2.0 * half_width); }
  double px(double x) const { return pad_px + (x + half_width) * scale(); }
  double py(double y) const { return pad_px + (half_width - y) * scale(); }
  double x_of(double px_value) const { return (px_value - pad_px) / scale() - half_width; }
  double y_of(double py_value) const { return half_width - (py_value - pad_px) / scale(); }
};

inline std::string render_episode_svg(const env::EnvConfig& cfg,
                                      const GroupPartition& partition,
                                      const std::vector<TrajectoryFrame>& frames,
                                      const RenderOptions& options) {
  require(!frames.empty(), "render: no frames");
  require(partition.num_agents() == static_cast<std::size_t>(cfg.num_pursuers),
          "render: partition does not match the pursuer count");
  const ArenaView view{cfg.arena_half_width, options.width_px, 20.0};
  const std::size_t n_frames = frames.size();
  const double duration = options.frame_seconds * static_cast<double>(n_frames);
  const int entities = cfg.num_entities();
  const auto& palette = group_palette();

  auto color_of = [&](int e) -> std::string {
    if (e >= cfg.num_pursuers) return kEvaderColor;
    return palette[partition.group_of(static_cast<std::size_t>(e)) % palette.size()];
  };

  std::string svg;
  const std::string size = std::to_string(options.width_px);
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + size +
         "\" height=\"" + size + "\" viewBox=\"0 0 " + size + " " + size + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<rect x=\"" + fixed(view.px(-cfg.arena_half_width)) + "\" y=\"" +
         fixed(view.py(cfg.arena_half_width)) + "\" width=\"" +
         fixed(2.0 * cfg.arena_half_width * view.scale()) + "\" height=\"" +
         fixed(2.0 * cfg.arena_half_width * view.scale()) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"2\"/>\n";

  if (options.trails) {
    for (int e = 0; e < entities; ++e) {
      svg += "<polyline class=\"trail\" fill=\"none\" stroke=\"" + color_of(e) +
             "\" stroke-opacity=\"0.3\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < n_frames; ++k) {
        const auto& p = frames[k].positions[static_cast<std::size_t>(e)];
        if (k) svg += ' ';
        svg += fixed(view.px(p.x())) + "," + fixed(view.py(p.y()));
      }
      svg += "\"/>\n";
    }
  }

  // Collision flashes: a ring around each touched evader, visible for one frame.
  const double contact = cfg.pursuer_radius + cfg.evader_radius;
  for (std::size_t k = 1; k < n_frames; ++k) {
    if (frames[k].collisions == 0) continue;
    for (int e = cfg.num_pursuers; e < entities; ++e) {
      const auto& pe = frames[k].positions[static_cast<std::size_t>(e)];
      bool touched = false;
      for (int i = 0; i < cfg.num_pursuers && !touched; ++i) {
        touched = (frames[k].positions[static_cast<std::size_t>(i)] - pe).norm() < contact;
      }
      if (!touched) continue;
      const double t0 = static_cast<double>(k) / static_cast<double>(n_frames);
      const double t1 = static_cast<double>(k + 1) / static_cast<double>(n_frames);
      svg += "<circle class=\"flash\" cx=\"" + fixed(view.px(pe.x())) + "\" cy=\"" +
             fixed(view.py(pe.y())) + "\" r=\"" + fixed(3.0 * cfg.evader_radius * view.scale()) +
             "\" fill=\"none\" stroke=\"#ffbf00\" stroke-width=\"3\" opacity=\"0\">"
             "<animate attributeName=\"opacity\" calcMode=\"discrete\" values=\"0;1;0\" "
             "keyTimes=\"0;" + fixed(t0, 6) + ";" + fixed(std::min(t1, 1.0), 6) +
             "\" dur=\"" + fixed(duration) + "s\" repeatCount=\"indefinite\"/></circle>\n";
    }
  }

  for (int e = 0; e < entities; ++e) {
    const bool pursuer = e < cfg.num_pursuers;
    std::string xs;
    std::string ys;
    for (std::size_t k = 0; k < n_frames; ++k) {
      const auto& p = frames[k].positions[static_cast<std::size_t>(e)];
      if (k) {
        xs += ';';
        ys += ';';
      }
      xs += fixed(view.px(p.x()));
      ys += fixed(view.py(p.y()));
    }
    const auto& p0 = frames.front().positions[static_cast<std::size_t>(e)];
    const double r = (pursuer ? cfg.pursuer_radius : cfg.evader_radius) * view.scale();
    svg += "<circle class=\"" + std::string(pursuer ? "pursuer" : "evader") +
           "\" data-entity=\"" + std::to_string(e) + "\"";
    if (pursuer) {
      svg += " data-group=\"" +
             std::to_string(partition.group_of(static_cast<std::size_t>(e))) + "\"";
    }
    svg += " cx=\"" + fixed(view.px(p0.x())) + "\" cy=\"" + fixed(view.py(p0.y())) +
           "\" r=\"" + fixed(r) + "\" fill=\"" + color_of(e) + "\">\n";
    svg += "<animate attributeName=\"cx\" dur=\"" + fixed(duration) +
           "s\" repeatCount=\"indefinite\" values=\"" + xs + "\"/>\n";
    svg += "<animate attributeName=\"cy\" dur=\"" + fixed(duration) +
           "s\" repeatCount=\"indefinite\" values=\"" + ys + "\"/>\n";
    svg += "</circle>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Curves

struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> std;  // empty or all zero: no band
};

struct Panel {
  std::string title;
  std::vector<CurveSeries> series;
};

inline std::string render_curves_svg(const std::vector<Panel>& panels, int width = 720,
                                     int panel_height = 300) {
  require(!panels.empty(), "render_curves_svg: nothing to plot");
  const double left = 70.0, right = 20.0, top = 30.0, bottom = 40.0;
  const int height = panel_height * static_cast<int>(panels.size());
  const auto& palette = group_palette();
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(width) + "\" height=\"" + std::to_string(height) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n"
                    "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double y0 = static_cast<double>(p) * panel_height;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : panel.series) {
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        const double sd = s.std.empty() ? 0.0 : s.std[k];
        xmin = std::min(xmin, s.x[k]);
        xmax = std::max(xmax, s.x[k]);
        ymin = std::min(ymin, s.mean[k] - sd);
        ymax = std::max(ymax, s.mean[k] + sd);
      }
    }
    if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    const double plot_w = width - left - right;
    const double plot_h = panel_height - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double y) { return y0 + top + (ymax - y) / (ymax - ymin) * plot_h; };

    svg += "<text x=\"" + fixed(left) + "\" y=\"" + fixed(y0 + 18.0) + "\">" +
           panel.title + "</text>\n";
    svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(y0 + top) + "\" width=\"" +
           fixed(plot_w) + "\" height=\"" + fixed(plot_h) +
           "\" fill=\"none\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + fixed(left - 5.0) + "\" y=\"" + fixed(y0 + top + 10.0) +
           "\" text-anchor=\"end\">" + fixed(ymax, 3) + "</text>\n";
    svg += "<text x=\"" + fixed(left - 5.0) + "\" y=\"" + fixed(y0 + top + plot_h) +
           "\" text-anchor=\"end\">" + fixed(ymin, 3) + "</text>\n";
    svg += "<text x=\"" + fixed(left) + "\" y=\"" + fixed(y0 + top + plot_h + 16.0) +
           "\">" + fixed(xmin, 0) + "</text>\n";
    svg += "<text x=\"" + fixed(left + plot_w) + "\" y=\"" +
           fixed(y0 + top + plot_h + 16.0) + "\" text-anchor=\"end\">" + fixed(xmax, 0) +
           "</text>\n";

    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const auto& series = panel.series[s];
      const std::string color = palette[s % palette.size()];
      const bool band = !series.std.empty() &&
                        std::any_of(series.std.begin(), series.std.end(),
                                    [](double v) { return v > 0.0; });
      if (band) {
        svg += "<polygon class=\"band\" fill=\"" + color + "\" fill-opacity=\"0.2\" points=\"";
        for (std::size_t k = 0; k < series.x.size(); ++k) {
          svg += fixed(sx(series.x[k])) + "," + fixed(sy(series.mean[k] + series.std[k])) + " ";
        }
        for (std::size_t k = series.x.size(); k-- > 0;) {
          svg += fixed(sx(series.x[k])) + "," + fixed(sy(series.mean[k] - series.std[k]));
          if (k) svg += ' ';
        }
        svg += "\"/>\n";
      }
      svg += "<polyline class=\"curve\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < series.x.size(); ++k) {
        if (k) svg += ' ';
        svg += fixed(sx(series.x[k])) + "," + fixed(sy(series.mean[k]));
      }
      svg += "\"/>\n";
      svg += "<text x=\"" + fixed(left + plot_w - 5.0) + "\" y=\"" +
             fixed(y0 + top + 16.0 + 14.0 * static_cast<double>(s)) +
             "\" text-anchor=\"end\" fill=\"" + color + "\">" + series.label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dlbc::render

#endif  // DLBC_RENDER_HPP_
