#pragma once

#include "eif/eif.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace eif {

//! ||S||_F / (||S||_F + ||A||_F) over the off-diagonal part, where S and A
//! are its symmetric and antisymmetric halves. 1 for the zero matrix.
double symmetry_score(const SquareMatrix& m);

struct HistogramOptions {
  std::size_t bins = 20;
  bool include_diagonal = false;
  std::optional<double> tau; // default 5% of the largest |off-diagonal| entry
  std::optional<std::pair<double, double>> range;
};

struct Histogram {
  std::vector<double> edges; // bins + 1
  std::vector<std::size_t> counts;
  bool include_diagonal = false;
  std::size_t selected = 0; // entries counted
  double tau = 0.0;
  double sparsity_fraction = 0.0;      // |M| < tau (or exactly 0)
  double negative_tail_fraction = 0.0; // M < -tau
};

Histogram diffusivity_histogram(const EifMatrix& m, const HistogramOptions& opts = {});
Histogram diffusivity_histogram(const SquareMatrix& m, const HistogramOptions& opts = {});

double pearson(std::span<const double> x, std::span<const double> y);

struct SymmetricTendency {
  double r = 0.0;         // corr(M_ij, M_ji) over i != j
  double r_control = 0.0; // same with the transpose row-shuffled, mean over shuffles
};

SymmetricTendency symmetric_tendency(const SquareMatrix& m, std::uint64_t seed,
                                     std::size_t shuffles = 20);

} // namespace eif
