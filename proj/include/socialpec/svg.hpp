#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "socialpec/pec.hpp"
#include "socialpec/predictor.hpp"

namespace socialpec {

// Minimal static SVG writer over world coordinates (meters), y-up.
class SvgCanvas {
 public:
  SvgCanvas(double min_x, double min_y, double max_x, double max_y,
            double width_px = 800.0, double margin_px = 40.0)
      : min_x_(min_x), min_y_(min_y), margin_(margin_px) {
    const double span_x = std::max(max_x - min_x, 1e-6);
    const double span_y = std::max(max_y - min_y, 1e-6);
    scale_ = (width_px - 2.0 * margin_px) / span_x;
    width_ = width_px;
    height_ = span_y * scale_ + 2.0 * margin_px;
  }

  double px(double x) const { return margin_ + (x - min_x_) * scale_; }
  double py(double y) const { return height_ - margin_ - (y - min_y_) * scale_; }

  void open_group(const std::string& id) {
    body_ << "  <g id=\"" << id << "\">\n";
  }
  void close_group() { body_ << "  </g>\n"; }

  void polyline(const std::vector<State>& points, const std::string& color,
                double stroke_width = 2.0, double opacity = 1.0,
                bool dashed = false) {
    if (points.empty()) return;
    body_ << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << stroke_width << "\" stroke-opacity=\"" << opacity << '"';
    if (dashed) body_ << " stroke-dasharray=\"6,4\"";
    body_ << " points=\"";
    for (const auto& p : points) body_ << px(p.x) << ',' << py(p.y) << ' ';
    body_ << "\"/>\n";
  }

  void circle(const State& at, double r_px, const std::string& color,
              double opacity = 1.0) {
    body_ << "  <circle cx=\"" << px(at.x) << "\" cy=\"" << py(at.y) << "\" r=\""
          << r_px << "\" fill=\"" << color << "\" fill-opacity=\"" << opacity
          << "\"/>\n";
  }

  // Line with a solid triangular head at `to`.
  void arrow(const State& from, const State& to, const std::string& color,
             double stroke_width = 1.5, double opacity = 1.0) {
    const double x1 = px(from.x), y1 = py(from.y), x2 = px(to.x), y2 = py(to.y);
    body_ << "  <line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
          << "\" y2=\"" << y2 << "\" stroke=\"" << color << "\" stroke-width=\""
          << stroke_width << "\" stroke-opacity=\"" << opacity << "\"/>\n";
    const double dx = x2 - x1, dy = y2 - y1;
    const double len = std::hypot(dx, dy);
    if (len < 1e-9) return;
    const double ux = dx / len, uy = dy / len;
    const double head = 6.0;
    body_ << "  <polygon fill=\"" << color << "\" fill-opacity=\"" << opacity
          << "\" points=\"" << x2 << ',' << y2 << ' '
          << x2 - head * ux + 0.5 * head * uy << ',' << y2 - head * uy - 0.5 * head * ux
          << ' ' << x2 - head * ux - 0.5 * head * uy << ','
          << y2 - head * uy + 0.5 * head * ux << "\"/>\n";
  }

  void triangle(const State& at, double size_px, const std::string& color) {
    const double x = px(at.x), y = py(at.y);
    body_ << "  <polygon fill=\"" << color << "\" points=\"" << x << ','
          << y - size_px << ' ' << x - 0.866 * size_px << ',' << y + 0.5 * size_px
          << ' ' << x + 0.866 * size_px << ',' << y + 0.5 * size_px << "\"/>\n";
  }

  void text(const State& at, const std::string& s, double font_px = 12.0) {
    body_ << "  <text x=\"" << px(at.x) << "\" y=\"" << py(at.y)
          << "\" font-size=\"" << font_px << "\" font-family=\"sans-serif\">" << s
          << "</text>\n";
  }

  std::string str() const {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
       << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << ' '
       << height_ << "\">\n"
       << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write SVG '" + path + "'");
    os << str();
  }

 private:
  double min_x_, min_y_, margin_, scale_, width_, height_;
  std::ostringstream body_;
};

// Cold (steel blue) to hot (red) map of v in [0,1].
inline std::string heat_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(70 + v * (220 - 70));
  const int g = static_cast<int>(110 * (1.0 - v) + 40 * v);
  const int b = static_cast<int>(180 * (1.0 - v) + 40 * v);
  std::ostringstream os;
  os << "rgb(" << r << ',' << g << ',' << b << ')';
  return os.str();
}

inline const std::vector<std::string>& ped_palette() {
  static const std::vector<std::string> colors{
      "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
      "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
  return colors;
}

// Observed history solid, ground truth dashed, every sample faint, and the
// best (smallest-ADE) sample highlighted. One group per pedestrian.
inline void render_prediction_svg(std::ostream& os, const Scene& truth,
                                  const std::vector<PredictionRollout>& rollouts,
                                  std::size_t t_h, std::size_t best_index) {
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  const auto grow = [&](const State& s) {
    min_x = std::min(min_x, s.x);
    min_y = std::min(min_y, s.y);
    max_x = std::max(max_x, s.x);
    max_y = std::max(max_y, s.y);
  };
  for (const auto& t : truth.trajectories())
    for (const auto& s : t.states()) grow(s);
  for (const auto& r : rollouts)
    for (const auto& track : r.predicted)
      for (const auto& s : track) grow(s);

  SvgCanvas canvas(min_x - 0.5, min_y - 0.5, max_x + 0.5, max_y + 0.5);
  for (std::size_t m = 0; m < truth.size(); ++m) {
    const std::string& color = ped_palette()[m % ped_palette().size()];
    canvas.open_group("ped" + std::to_string(m));

    std::vector<State> observed, future;
    for (std::size_t t = 0; t < t_h; ++t) observed.push_back(truth.at(m).at(t));
    future.push_back(truth.at(m).at(t_h - 1));
    for (std::size_t t = t_h; t < truth.length(); ++t) future.push_back(truth.at(m).at(t));

    for (std::size_t s = 0; s < rollouts.size(); ++s) {
      if (s == best_index) continue;
      std::vector<State> line{observed.back()};
      for (const auto& p : rollouts[s].predicted[m]) line.push_back(p);
      canvas.polyline(line, color, 1.0, 0.18);
    }
    canvas.polyline(observed, color, 2.5);
    canvas.polyline(future, color, 1.5, 0.9, /*dashed=*/true);
    if (best_index < rollouts.size()) {
      std::vector<State> line{observed.back()};
      for (const auto& p : rollouts[best_index].predicted[m]) line.push_back(p);
      canvas.polyline(line, color, 2.5, 1.0);
      canvas.circle(line.back(), 4.0, color);
    }
    canvas.circle(observed.back(), 4.0, color);
    canvas.close_group();
  }
  os << canvas.str();
}

// Pattern bank as arrows around the origin; the target marker sits at (0,0).
// Optional per-pattern heat values (any range; normalized here) color the
// arrows by match strength.
inline void render_pattern_svg(std::ostream& os, const MotionPatternBank& bank,
                               const std::vector<double>* heat = nullptr) {
  bank.validate();
  if (heat && heat->size() != bank.n_patterns())
    throw ShapeError("pattern svg: heat length mismatch");
  double min_x = -1.0, min_y = -1.0, max_x = 1.0, max_y = 1.0;
  for (std::size_t j = 0; j < bank.n_patterns(); ++j)
    for (std::size_t k = 0; k < bank.pattern_len(); ++k) {
      min_x = std::min(min_x, bank.patterns.at({j, k, 0}));
      max_x = std::max(max_x, bank.patterns.at({j, k, 0}));
      min_y = std::min(min_y, bank.patterns.at({j, k, 1}));
      max_y = std::max(max_y, bank.patterns.at({j, k, 1}));
    }
  double lo = 0.0, hi = 1.0;
  if (heat) {
    lo = *std::min_element(heat->begin(), heat->end());
    hi = *std::max_element(heat->begin(), heat->end());
    if (hi - lo < 1e-12) hi = lo + 1.0;
  }

  SvgCanvas canvas(min_x - 0.5, min_y - 0.5, max_x + 0.5, max_y + 0.5);
  canvas.open_group("patterns");
  for (std::size_t j = 0; j < bank.n_patterns(); ++j) {
    const std::string color =
        heat ? heat_color(((*heat)[j] - lo) / (hi - lo)) : std::string("#4878a8");
    const double opacity = heat ? 0.95 : 0.8;
    if (bank.pattern_len() == 1) {
      canvas.circle({bank.patterns.at({j, 0, 0}), bank.patterns.at({j, 0, 1})}, 3.0,
                    color, opacity);
      continue;
    }
    std::vector<State> points;
    for (std::size_t k = 0; k < bank.pattern_len(); ++k)
      points.push_back({bank.patterns.at({j, k, 0}), bank.patterns.at({j, k, 1})});
    for (std::size_t k = 0; k + 2 < points.size(); ++k)
      canvas.polyline({points[k], points[k + 1]}, color, 1.5, opacity);
    canvas.arrow(points[points.size() - 2], points.back(), color, 1.5, opacity);
  }
  canvas.close_group();
  canvas.triangle({0, 0}, 7.0, "#1f4fbf");  // the target pedestrian
  os << canvas.str();
}

// Context trajectories as dots (large dot = last step) plus the pattern bank
// heated by the chosen segment's match scores.
inline void render_match_svg(std::ostream& os, const MotionPatternBank& bank,
                             const Scene& ego_scene, std::size_t target,
                             std::size_t segment,
                             const std::vector<double>& heat) {
  std::ostringstream patterns;
  render_pattern_svg(patterns, bank, &heat);
  // splice trajectory markers before the closing tag
  std::string base = patterns.str();
  const auto at = base.rfind("</svg>");
  std::ostringstream extra;
  double min_x = -1, min_y = -1, max_x = 1, max_y = 1;
  for (std::size_t j = 0; j < bank.n_patterns(); ++j)
    for (std::size_t k = 0; k < bank.pattern_len(); ++k) {
      min_x = std::min(min_x, bank.patterns.at({j, k, 0}));
      max_x = std::max(max_x, bank.patterns.at({j, k, 0}));
      min_y = std::min(min_y, bank.patterns.at({j, k, 1}));
      max_y = std::max(max_y, bank.patterns.at({j, k, 1}));
    }
  SvgCanvas overlay(min_x - 0.5, min_y - 0.5, max_x + 0.5, max_y + 0.5);
  (void)segment;
  for (std::size_t m = 0; m < ego_scene.size(); ++m) {
    const auto& traj = ego_scene.at(m);
    const bool is_target = m == target;
    const std::string color = is_target ? "#1f4fbf" : "#444444";
    for (std::size_t t = 0; t < traj.length(); ++t) {
      if (is_target)
        overlay.triangle(traj.at(t), 3.5, color);
      else
        overlay.circle(traj.at(t), t + 1 == traj.length() ? 5.0 : 2.5, color, 0.85);
    }
  }
  extra << overlay.str();
  // keep only the drawing body of the overlay
  std::string overlay_text = extra.str();
  const auto body_start = overlay_text.find("<rect");
  const auto body_end = overlay_text.rfind("</svg>");
  const auto rect_end = overlay_text.find('\n', body_start);
  os << base.substr(0, at) << overlay_text.substr(rect_end + 1, body_end - rect_end - 1)
     << "</svg>\n";
}

}  // namespace socialpec
