#include "eif/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace eif {

namespace {

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string num(double v, const char* fmt = "%.2f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

Rgb mix(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

} // namespace

std::string diverging_color(double t) {
  constexpr Rgb neutral{247, 247, 247}, neg{5, 48, 97}, pos{103, 0, 31};
  t = std::clamp(std::isfinite(t) ? t : 0.0, -1.0, 1.0);
  const Rgb c = t < 0 ? mix(neutral, neg, -t) : mix(neutral, pos, t);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
  return buf;
}

std::string render_heatmap_svg(const EifMatrix& m, std::string_view title) {
  const std::size_t n = m.size();
  const bool cell_labels = n <= 20;
  const bool axis_labels = n <= 60;
  const double cell = n <= 20 ? 36.0 : std::max(4.0, 720.0 / static_cast<double>(n));
  const double margin = axis_labels ? 150.0 : 40.0;
  const double top = 40.0 + (axis_labels ? 110.0 : 0.0);
  const double grid = cell * static_cast<double>(n);
  const double width = margin + grid + 110.0, height = top + grid + 30.0;

  double vmax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (m.measured(i, j))
        vmax = std::max(vmax, std::abs(m(i, j)));

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width, "%.0f") +
                  "\" height=\"" + num(height, "%.0f") + "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::string heading = title.empty() ? "EIF matrix (" + std::string(to_string(m.condition)) + ")"
                                      : std::string(title);
  s += "<text x=\"10\" y=\"22\" font-size=\"14\">" + esc(heading) + "</text>\n";

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = margin + cell * j, y = top + cell * i;
      const bool ok = m.measured(i, j);
      const double t = ok && vmax > 0 ? m(i, j) / vmax : 0.0;
      s += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) +
           "\" height=\"" + num(cell) + "\" fill=\"" + (ok ? diverging_color(t) : "#bdbdbd") +
           "\"/>\n";
      if (cell_labels && ok) {
        const char* ink = std::abs(t) > 0.55 ? "white" : "black";
        s += "<text x=\"" + num(x + cell / 2) + "\" y=\"" + num(y + cell / 2 + 3) +
             "\" font-size=\"8\" text-anchor=\"middle\" fill=\"" + ink + "\">" +
             esc(num(m(i, j), "%.2g")) + "</text>\n";
      }
    }

  if (axis_labels)
    for (std::size_t k = 0; k < n; ++k) {
      const std::string id = esc(m.manifest[k].id);
      const double c = cell * k + cell / 2;
      s += "<text x=\"" + num(margin - 4) + "\" y=\"" + num(top + c + 3) +
           "\" font-size=\"9\" text-anchor=\"end\">" + id + "</text>\n";
      s += "<text x=\"" + num(margin + c) + "\" y=\"" + num(top - 4) +
           "\" font-size=\"9\" transform=\"rotate(-60 " + num(margin + c) + " " + num(top - 4) +
           ")\">" + id + "</text>\n";
    }

  // Colour bar.
  const double bx = margin + grid + 20.0;
  for (int k = 0; k < 50; ++k) {
    const double t = 1.0 - 2.0 * k / 49.0;
    s += "<rect x=\"" + num(bx) + "\" y=\"" + num(top + grid * k / 50.0) + "\" width=\"14\" height=\"" +
         num(grid / 50.0 + 0.5) + "\" fill=\"" + diverging_color(t) + "\"/>\n";
  }
  s += "<text x=\"" + num(bx + 18) + "\" y=\"" + num(top + 8) + "\" font-size=\"9\">" +
       esc(num(vmax, "%.3g")) + "</text>\n";
  s += "<text x=\"" + num(bx + 18) + "\" y=\"" + num(top + grid / 2 + 3) +
       "\" font-size=\"9\">0</text>\n";
  s += "<text x=\"" + num(bx + 18) + "\" y=\"" + num(top + grid) + "\" font-size=\"9\">" +
       esc(num(-vmax, "%.3g")) + "</text>\n";
  s += "</svg>\n";
  return s;
}

std::string render_histogram_svg(const Histogram& h, std::string_view title) {
  const double W = 640, H = 360, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  const std::size_t bins = h.counts.size();
  std::size_t peak = 0;
  for (auto c : h.counts)
    peak = std::max(peak, c);

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" "
                  "font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"22\" font-size=\"14\">" +
       esc(title.empty() ? std::string("EIF value histogram") : std::string(title)) + "</text>\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double bh = peak ? ph * static_cast<double>(h.counts[b]) / static_cast<double>(peak) : 0;
    const double x = left + pw * b / bins;
    const double mid = bins ? 0.5 * (h.edges[b] + h.edges[b + 1]) : 0.0;
    const char* fill = mid < -h.tau ? "#2166ac" : (mid > h.tau ? "#b2182b" : "#969696");
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(top + ph - bh) + "\" width=\"" +
         num(pw / bins - 1) + "\" height=\"" + num(bh) + "\" fill=\"" + fill + "\"/>\n";
  }
  s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(left + pw) +
       "\" y2=\"" + num(top + ph) + "\" stroke=\"black\"/>\n";
  if (!h.edges.empty()) {
    s += "<text x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) +
         "\" font-size=\"10\" text-anchor=\"middle\">" + esc(num(h.edges.front(), "%.3g")) +
         "</text>\n";
    s += "<text x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) +
         "\" font-size=\"10\" text-anchor=\"middle\">" + esc(num(h.edges.back(), "%.3g")) +
         "</text>\n";
  }
  s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 12) +
       "\" font-size=\"11\" text-anchor=\"middle\">EIF (sparsity " +
       num(h.sparsity_fraction, "%.3f") + ", negative tail " +
       num(h.negative_tail_fraction, "%.3f") + ", n = " + std::to_string(h.selected) +
       ")</text>\n";
  s += "<text x=\"14\" y=\"" + num(top + ph / 2) + "\" font-size=\"11\" transform=\"rotate(-90 14 " +
       num(top + ph / 2) + ")\" text-anchor=\"middle\">count (peak " + std::to_string(peak) +
       ")</text>\n";
  s += "</svg>\n";
  return s;
}

} // namespace eif
