#include "eif/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace eif {

double symmetry_score(const SquareMatrix& m) {
  const std::size_t n = m.size();
  if (n < 2)
    throw std::invalid_argument("symmetry_score: need n >= 2");
  double sym = 0.0, anti = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double s = 0.5 * (m(i, j) + m(j, i));
      const double a = 0.5 * (m(i, j) - m(j, i));
      sym += s * s;
      anti += a * a;
    }
  sym = std::sqrt(sym);
  anti = std::sqrt(anti);
  if (sym + anti == 0.0)
    return 1.0;
  return sym / (sym + anti);
}

namespace {

Histogram histogram_of(const SquareMatrix& m, const std::vector<std::uint8_t>* mask,
                       const HistogramOptions& opts) {
  if (opts.bins < 2)
    throw std::invalid_argument("diffusivity_histogram: need at least 2 bins");
  const std::size_t n = m.size();
  auto measured = [&](std::size_t i, std::size_t j) { return !mask || (*mask)[i * n + j] != 0; };

  std::vector<double> sel;
  double max_off = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!measured(i, j))
        continue;
      if (i != j)
        max_off = std::max(max_off, std::abs(m(i, j)));
      if (i != j || opts.include_diagonal)
        sel.push_back(m(i, j));
    }

  Histogram h;
  h.include_diagonal = opts.include_diagonal;
  h.selected = sel.size();
  h.tau = opts.tau.value_or(0.05 * max_off);
  h.counts.assign(opts.bins, 0);

  double lo = 0.0, hi = 0.0;
  if (opts.range) {
    std::tie(lo, hi) = *opts.range;
  } else if (!sel.empty()) {
    auto [mn, mx] = std::minmax_element(sel.begin(), sel.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  h.edges.resize(opts.bins + 1);
  for (std::size_t b = 0; b <= opts.bins; ++b)
    h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(opts.bins);

  std::size_t sparse = 0, tail = 0;
  for (double v : sel) {
    const double pos = (v - lo) / (hi - lo) * static_cast<double>(opts.bins);
    const auto b = static_cast<std::size_t>(
        std::clamp(std::floor(pos), 0.0, static_cast<double>(opts.bins - 1)));
    ++h.counts[b];
    if (v == 0.0 || std::abs(v) < h.tau)
      ++sparse;
    if (v < -h.tau)
      ++tail;
  }
  if (!sel.empty()) {
    h.sparsity_fraction = static_cast<double>(sparse) / static_cast<double>(sel.size());
    h.negative_tail_fraction = static_cast<double>(tail) / static_cast<double>(sel.size());
  }
  return h;
}

} // namespace

Histogram diffusivity_histogram(const EifMatrix& m, const HistogramOptions& opts) {
  return histogram_of(m.values, &m.mask, opts);
}

Histogram diffusivity_histogram(const SquareMatrix& m, const HistogramOptions& opts) {
  return histogram_of(m, nullptr, opts);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2)
    return 0.0;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

SymmetricTendency symmetric_tendency(const SquareMatrix& m, std::uint64_t seed,
                                     std::size_t shuffles) {
  const std::size_t n = m.size();
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        x.push_back(m(i, j));
        y.push_back(m(j, i));
      }
  SymmetricTendency out;
  out.r = pearson(x, y);
  if (shuffles == 0)
    return out;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  double acc = 0.0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j)
          y[k++] = m(perm[j], i);
    acc += pearson(x, y);
  }
  out.r_control = acc / static_cast<double>(shuffles);
  return out;
}

} // namespace eif
