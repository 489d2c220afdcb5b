#include "eif/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace eif {

namespace {

double evaluate(const TensorProgram& f, const Tensor& x) {
  Tape tape;
  Var in = tape.leaf(x, false);
  return f(tape, in).value().item();
}

} // namespace

double finite_difference_check(const TensorProgram& f, const Tensor& x, double eps,
                               const FdOptions& opts) {
  if (!(eps > 0.0))
    throw std::invalid_argument("finite_difference_check: eps must be positive");

  Tensor analytic;
  {
    Tape tape;
    Var in = tape.leaf(x, true);
    Var out = f(tape, in);
    tape.backward(out);
    analytic = tape.grad(in);
  }

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (opts.max_coords > 0 && opts.max_coords < coords.size()) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0.0;
  Tensor probe = x;
  for (auto i : coords) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = evaluate(f, probe);
    probe[i] = orig - eps;
    const double down = evaluate(f, probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

} // namespace eif
