#pragma once

#include "eif/autodiff.hpp"

#include <cstdint>
#include <functional>

namespace eif {

//! A scalar-valued tensor program: builds its output on `tape` from input `x`.
using TensorProgram = std::function<Var(Tape& tape, Var x)>;

struct FdOptions {
  //! Check at most this many coordinates (0 = all), chosen by `seed`.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

//! Max over checked coordinates of |g_analytic - g_numeric| / max(1, |g_numeric|)
//! with g_numeric the central difference (f(x+eps) - f(x-eps)) / 2eps.
double finite_difference_check(const TensorProgram& f, const Tensor& x, double eps,
                               const FdOptions& opts = {});

} // namespace eif
