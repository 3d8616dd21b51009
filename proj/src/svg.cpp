// SPDX-License-Identifier: Apache-2.0
#include "mapgate/svg.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace mapgate::svg {

EllipseParams ellipse_params(const Eigen::Matrix2d& sigma) {
  const double a = sigma(0, 0);
  const double b = 0.5 * (sigma(0, 1) + sigma(1, 0));
  const double c = sigma(1, 1);
  const double tr = a + c;
  const double disc = std::sqrt(std::max(0.0, (a - c) * (a - c) + 4.0 * b * b));
  const double l1 = 0.5 * (tr + disc);
  const double l2 = 0.5 * (tr - disc);

  EllipseParams out;
  out.rx = std::sqrt(std::max(0.0, l1));
  out.ry = std::sqrt(std::max(0.0, l2));
  if (std::abs(b) > 1e-300) {
    out.angle_rad = std::atan2(l1 - a, b);
  } else {
    out.angle_rad = a >= c ? 0.0 : std::numbers::pi / 2.0;
  }
  return out;
}

namespace {

struct Frame {
  double min_x, min_y, max_x, max_y;

  void grow(double x, double y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// SVG y grows downward; flip sign on write.
std::string polyline(const Eigen::MatrixX2d& pts, const std::string& style) {
  std::string out = "  <polyline points=\"";
  for (long i = 0; i < pts.rows(); ++i) {
    out += fmt(pts(i, 0)) + "," + fmt(-pts(i, 1));
    if (i + 1 < pts.rows()) out += " ";
  }
  out += "\" style=\"" + style + "\"/>\n";
  return out;
}

}  // namespace

std::string render_scene(const Scene& scene, const PolylineMap* predicted,
                         const std::map<std::string, CandidateSet>& candidates) {
  Frame frame{1e300, 1e300, -1e300, -1e300};
  const auto grow_pts = [&](const Eigen::MatrixX2d& pts) {
    for (long i = 0; i < pts.rows(); ++i) frame.grow(pts(i, 0), pts(i, 1));
  };
  for (const auto& e : scene.elements) grow_pts(e.true_pts);
  grow_pts(scene.history.points);
  grow_pts(scene.future_gt.points);

  const double pad = 3.0;
  const double w = frame.max_x - frame.min_x + 2 * pad;
  const double h = frame.max_y - frame.min_y + 2 * pad;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" +
         fmt(frame.min_x - pad) + " " + fmt(-frame.max_y - pad) + " " + fmt(w) +
         " " + fmt(h) + "\" width=\"900\">\n";
  out += "  <!-- scene " + scene.id + " -->\n";

  for (const auto& e : scene.elements) {
    const std::string style =
        e.cls == ElementClass::divider
            ? "fill:none;stroke:#999999;stroke-width:0.08;stroke-dasharray:0.6 0.4"
            : "fill:none;stroke:#555555;stroke-width:0.12";
    out += polyline(e.true_pts, style);
    for (const auto& o : e.observed) {
      out += "  <circle cx=\"" + fmt(o.noisy_xy.x()) + "\" cy=\"" +
             fmt(-o.noisy_xy.y()) +
             "\" r=\"0.08\" style=\"fill:#aa6666;fill-opacity:0.6\"/>\n";
    }
  }

  if (predicted != nullptr) {
    for (const auto& e : predicted->elements) {
      for (const auto& v : e.vertices) {
        const EllipseParams el = ellipse_params(v.cov.matrix());
        out += "  <ellipse cx=\"" + fmt(v.mu.x()) + "\" cy=\"" + fmt(-v.mu.y()) +
               "\" rx=\"" + fmt(el.rx) + "\" ry=\"" + fmt(el.ry) +
               "\" transform=\"rotate(" +
               fmt(-el.angle_rad * 180.0 / std::numbers::pi) + " " +
               fmt(v.mu.x()) + " " + fmt(-v.mu.y()) +
               ")\" style=\"fill:#4477cc;fill-opacity:0.15;stroke:#4477cc;"
               "stroke-width:0.02\"/>\n";
        out += "  <circle cx=\"" + fmt(v.mu.x()) + "\" cy=\"" + fmt(-v.mu.y()) +
               "\" r=\"0.1\" style=\"fill:#4477cc\"/>\n";
      }
    }
  }

  const std::map<std::string, std::string> stream_colors{
      {"base", "#cc8844"}, {"unc", "#44aa66"}, {"gated", "#cc4444"}};
  for (const auto& [name, cands] : candidates) {
    const auto it = stream_colors.find(name);
    const std::string color = it == stream_colors.end() ? "#888888" : it->second;
    for (const auto& traj : cands.trajectories) {
      out += polyline(traj, "fill:none;stroke:" + color +
                                ";stroke-width:0.07;stroke-opacity:0.7");
    }
  }

  out += polyline(scene.history.points,
                  "fill:none;stroke:#000000;stroke-width:0.15");
  out += polyline(scene.future_gt.points,
                  "fill:none;stroke:#118811;stroke-width:0.15;"
                  "stroke-dasharray:0.3 0.2");
  out += "</svg>\n";
  return out;
}

}  // namespace mapgate::svg
