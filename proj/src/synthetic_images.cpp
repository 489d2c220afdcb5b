#include "eif/image_data.hpp"

#include "eif/hashing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace eif {

namespace {

struct Pt {
  double x, y;
};
using Poly = std::vector<Pt>;

struct Affine {
  double a, b, c, d, tx, ty;
  Pt operator()(Pt p) const {
    const double x = p.x - 0.5, y = p.y - 0.5;
    return {a * x + b * y + 0.5 + tx, c * x + d * y + 0.5 + ty};
  }
  Poly operator()(const Poly& p) const {
    Poly out;
    for (auto q : p)
      out.push_back((*this)(q));
    return out;
  }
};

Affine random_affine(std::mt19937_64& rng, double max_deg, double smin, double smax,
                     double shift) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), sc(smin, smax);
  const double th = u(rng) * max_deg * std::numbers::pi / 180.0;
  const double sx = sc(rng), sy = sc(rng), sh = 0.15 * u(rng);
  const double c = std::cos(th), s = std::sin(th);
  return {c * sx, -s * sy + sh, s * sx, c * sy, shift * u(rng), shift * u(rng)};
}

Poly ellipse(double cx, double cy, double rx, double ry, int n = 20) {
  Poly p;
  for (int k = 0; k <= n; ++k) {
    const double t = 2.0 * std::numbers::pi * k / n;
    p.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return p;
}

class Canvas {
public:
  std::array<double, kImagePixels> px{};

  void stroke(const Poly& line, double width, double value) {
    for (std::size_t r = 0; r < kImageSide; ++r)
      for (std::size_t c = 0; c < kImageSide; ++c) {
        const Pt p{(c + 0.5) / kImageSide, (r + 0.5) / kImageSide};
        double best = 1e9;
        for (std::size_t k = 0; k + 1 < line.size(); ++k)
          best = std::min(best, segment_distance(p, line[k], line[k + 1]));
        const double cover = std::clamp(width / 2.0 - best * kImageSide + 0.5, 0.0, 1.0);
        blend(r * kImageSide + c, cover, value);
      }
  }

  void fill(const Poly& poly, double value) {
    for (std::size_t r = 0; r < kImageSide; ++r)
      for (std::size_t c = 0; c < kImageSide; ++c) {
        int hits = 0;
        for (double dy : {0.25, 0.75})
          for (double dx : {0.25, 0.75})
            hits += inside(poly, {(c + dx) / kImageSide, (r + dy) / kImageSide});
        blend(r * kImageSide + c, hits / 4.0, value);
      }
  }

  // Multiplies covered pixels by a periodic factor in x (stripes) or y.
  void stripes(double period, double depth, bool vertical) {
    for (std::size_t r = 0; r < kImageSide; ++r)
      for (std::size_t c = 0; c < kImageSide; ++c) {
        const double t = vertical ? static_cast<double>(c) : static_cast<double>(r);
        const double f = 1.0 - depth * (0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * t / period));
        px[r * kImageSide + c] *= f;
      }
  }

private:
  void blend(std::size_t k, double cover, double value) {
    if (cover > 0.0)
      px[k] = px[k] * (1.0 - cover) + value * cover;
  }

  static double segment_distance(Pt p, Pt a, Pt b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - a.x - t * vx, dy = p.y - a.y - t * vy;
    return std::sqrt(dx * dx + dy * dy);
  }

  static bool inside(const Poly& poly, Pt p) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
      const Pt a = poly[i], b = poly[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
        in = !in;
    }
    return in;
  }
};

std::vector<Poly> digit_strokes(int d) {
  switch (d) {
  case 0: return {ellipse(0.5, 0.5, 0.24, 0.36)};
  case 1: return {{{0.38, 0.26}, {0.52, 0.12}, {0.52, 0.88}}};
  case 2:
    return {{{0.28, 0.3}, {0.35, 0.17}, {0.5, 0.12}, {0.65, 0.17}, {0.72, 0.3}, {0.68, 0.45},
             {0.28, 0.88}, {0.76, 0.88}}};
  case 3:
    return {{{0.28, 0.18}, {0.5, 0.12}, {0.7, 0.2}, {0.7, 0.38}, {0.48, 0.5}, {0.72, 0.62},
             {0.72, 0.8}, {0.5, 0.88}, {0.28, 0.82}}};
  case 4: return {{{0.64, 0.88}, {0.64, 0.12}, {0.25, 0.62}, {0.8, 0.62}}};
  case 5:
    return {{{0.72, 0.12}, {0.32, 0.12}, {0.3, 0.45}, {0.55, 0.42}, {0.72, 0.55}, {0.72, 0.75},
             {0.55, 0.88}, {0.28, 0.84}}};
  case 6:
    return {{{0.68, 0.14}, {0.45, 0.2}, {0.32, 0.45}, {0.3, 0.7}, {0.45, 0.88}, {0.65, 0.85},
             {0.72, 0.68}, {0.6, 0.52}, {0.42, 0.52}, {0.31, 0.62}}};
  case 7: return {{{0.25, 0.12}, {0.76, 0.12}, {0.45, 0.88}}};
  case 8: return {ellipse(0.5, 0.3, 0.18, 0.17), ellipse(0.5, 0.68, 0.22, 0.2)};
  default: return {ellipse(0.5, 0.32, 0.2, 0.18), {{0.7, 0.32}, {0.62, 0.88}}};
  }
}

void draw_garment(Canvas& cv, int cls, const Affine& T, double ink, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Poly tshirt{{0.3, 0.15}, {0.4, 0.12}, {0.6, 0.12}, {0.7, 0.15}, {0.9, 0.32}, {0.8, 0.42},
                    {0.72, 0.35}, {0.72, 0.88}, {0.28, 0.88}, {0.28, 0.35}, {0.2, 0.42}, {0.1, 0.32}};
  const Poly longsleeve{{0.3, 0.12}, {0.7, 0.12}, {0.88, 0.3}, {0.94, 0.86}, {0.8, 0.86},
                        {0.74, 0.42}, {0.74, 0.9}, {0.26, 0.9}, {0.26, 0.42}, {0.2, 0.86},
                        {0.06, 0.86}, {0.12, 0.3}};
  switch (cls) {
  case 0: cv.fill(T(tshirt), ink); break;
  case 1:
    cv.fill(T(Poly{{0.32, 0.08}, {0.68, 0.08}, {0.7, 0.92}, {0.56, 0.92}, {0.5, 0.35},
                   {0.44, 0.92}, {0.3, 0.92}}),
            ink);
    break;
  case 2: cv.fill(T(longsleeve), ink); break;
  case 3:
    cv.fill(T(Poly{{0.4, 0.08}, {0.6, 0.08}, {0.62, 0.35}, {0.82, 0.92}, {0.18, 0.92},
                   {0.38, 0.35}}),
            ink);
    break;
  case 4:
    cv.fill(T(longsleeve), ink);
    cv.stroke(T(Poly{{0.5, 0.14}, {0.5, 0.9}}), 1.6, 0.1 * ink);
    cv.stroke(T(Poly{{0.36, 0.14}, {0.5, 0.34}, {0.64, 0.14}}), 1.4, 0.1 * ink);
    break;
  case 5:
    cv.stroke(T(Poly{{0.08, 0.78}, {0.92, 0.78}}), 2.5, ink);
    for (double x0 : {0.2, 0.42, 0.64})
      cv.stroke(T(Poly{{x0, 0.78}, {x0 + 0.12, 0.5}, {x0 + 0.22, 0.78}}), 1.2, ink);
    break;
  case 6:
    cv.fill(T(Poly{{0.3, 0.12}, {0.7, 0.12}, {0.86, 0.3}, {0.86, 0.62}, {0.74, 0.62},
                   {0.74, 0.9}, {0.26, 0.9}, {0.26, 0.62}, {0.14, 0.62}, {0.14, 0.3}}),
            ink);
    cv.stripes(3.0 + u(rng), 0.45, true);
    break;
  case 7:
    cv.fill(T(Poly{{0.06, 0.58}, {0.42, 0.48}, {0.58, 0.36}, {0.74, 0.38}, {0.94, 0.62},
                   {0.94, 0.78}, {0.06, 0.78}}),
            ink);
    break;
  case 8:
    cv.fill(T(Poly{{0.14, 0.36}, {0.86, 0.36}, {0.86, 0.9}, {0.14, 0.9}}), ink);
    cv.stroke(T(Poly{{0.32, 0.36}, {0.36, 0.16}, {0.64, 0.16}, {0.68, 0.36}}), 1.6, ink);
    break;
  default:
    cv.fill(T(Poly{{0.26, 0.1}, {0.56, 0.1}, {0.6, 0.52}, {0.9, 0.64}, {0.92, 0.86},
                   {0.22, 0.86}}),
            ink);
    break;
  }
}

template <class Draw>
IdxDataset render(std::size_t count, std::uint64_t seed, const char* tag, Draw draw) {
  IdxDataset d;
  d.images.resize(count * kImagePixels);
  d.labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng(substream_seed(seed, std::string(tag) + std::to_string(k)));
    const int cls = static_cast<int>(k % 10);
    Canvas cv;
    draw(cv, cls, rng);
    std::uniform_real_distribution<double> grain(0.0, 0.08);
    for (std::size_t p = 0; p < kImagePixels; ++p) {
      const double v = std::clamp(cv.px[p] + (cv.px[p] > 0.05 ? grain(rng) : 0.0), 0.0, 1.0);
      d.images[k * kImagePixels + p] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    d.labels[k] = static_cast<std::uint8_t>(cls);
  }
  d.source = std::string("synthetic:") + tag + ":" + std::to_string(seed);
  std::string bytes(d.images.begin(), d.images.end());
  bytes.append(d.labels.begin(), d.labels.end());
  d.checksum = sha256_hex(bytes);
  return d;
}

} // namespace

IdxDataset synthetic_digits(std::size_t count, std::uint64_t seed) {
  return render(count, seed, "digits", [](Canvas& cv, int cls, std::mt19937_64& rng) {
    const Affine T = random_affine(rng, 14.0, 0.8, 1.05, 0.07);
    std::uniform_real_distribution<double> width(1.6, 2.8), ink(0.75, 1.0);
    const double w = width(rng), v = ink(rng);
    for (const auto& s : digit_strokes(cls))
      cv.stroke(T(s), w, v);
  });
}

IdxDataset synthetic_fashion(std::size_t count, std::uint64_t seed) {
  return render(count, seed, "fashion", [](Canvas& cv, int cls, std::mt19937_64& rng) {
    const Affine T = random_affine(rng, 8.0, 0.8, 1.08, 0.06);
    std::uniform_real_distribution<double> ink(0.45, 1.0);
    draw_garment(cv, cls, T, ink(rng), rng);
  });
}

} // namespace eif
