#pragma once

#include "morphogen/rng.hpp"
#include "morphogen/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace morphogen {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Compares an analytic gradient against central finite differences
/// (loss(x + eps e_i) - loss(x - eps e_i)) / 2 eps, coordinate by
/// coordinate. Returns the max relative error
/// |g_a - g_n| / max(1e-8, |g_a| + |g_n|). Throws on non-finite loss.
inline double finite_difference_check(
    const std::function<double(const Vecd&)>& loss, const Vecd& theta,
    const Vecd& analytic_grad, const GradCheckOptions& opts = {}) {
  if (theta.size() != analytic_grad.size())
    throw DimensionError("finite_difference_check: gradient size mismatch");

  std::vector<Eigen::Index> coords(static_cast<std::size_t>(theta.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (opts.max_coords > 0 && opts.max_coords < coords.size()) {
    Rng rng(opts.seed);
    rng.shuffle(coords);
    coords.resize(opts.max_coords);
  }

  Vecd x = theta;
  double max_rel = 0.0;
  for (Eigen::Index i : coords) {
    const double orig = x(i);
    x(i) = orig + opts.eps;
    const double lp = loss(x);
    x(i) = orig - opts.eps;
    const double lm = loss(x);
    x(i) = orig;
    if (!std::isfinite(lp) || !std::isfinite(lm))
      throw Error("finite_difference_check: non-finite loss");
    const double gn = (lp - lm) / (2.0 * opts.eps);
    const double ga = analytic_grad(i);
    const double rel =
        std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace morphogen
