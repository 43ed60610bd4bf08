// Test-only oracles: quadrature, finite differences and small helpers kept
// independent of the library code paths they check.
#pragma once

#include <cmath>
#include <functional>

#include "monet/core.hpp"
#include "monet/random.hpp"

namespace oracle {

// Adaptive Simpson with a forced minimum subdivision depth so narrow peaks
// cannot hide from the initial coarse samples.
inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double tol,
                               int min_depth = 8, int max_depth = 28) {
  auto simpson = [&](double lo, double hi) {
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
  };
  std::function<double(double, double, double, double, int)> rec =
      [&](double lo, double hi, double whole, double eps, int depth) -> double {
    const double mid = 0.5 * (lo + hi);
    const double left = simpson(lo, mid), right = simpson(mid, hi);
    if (depth <= max_depth - min_depth &&
        std::abs(left + right - whole) < 15.0 * eps)
      return left + right + (left + right - whole) / 15.0;
    if (depth <= 0) return left + right;
    return rec(lo, mid, left, eps / 2, depth - 1) +
           rec(mid, hi, right, eps / 2, depth - 1);
  };
  return rec(a, b, simpson(a, b), tol, max_depth);
}

inline double rel_err(double got, double want, double floor = 1e-8) {
  return std::abs(got - want) /
         std::max({std::abs(got), std::abs(want), floor});
}

template <typename T>
monet::Tensor4<T> rand_tensor(int n, int c, int h, int w, double lo, double hi,
                              std::uint64_t seed) {
  monet::Tensor4<T> t(n, c, h, w);
  monet::Rng rng(seed);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
monet::Image<T> rand_image(int h, int w, double lo, double hi,
                           std::uint64_t seed) {
  monet::Image<T> img(h, w);
  monet::Rng rng(seed);
  for (auto& v : img.pixels) v = static_cast<T>(rng.uniform(lo, hi));
  return img;
}

// Central finite difference of a scalar functional along one coordinate.
template <typename F>
double central_diff(F&& f, double& coord, double h = 1e-5) {
  const double keep = coord;
  coord = keep + h;
  const double fp = f();
  coord = keep - h;
  const double fm = f();
  coord = keep;
  return (fp - fm) / (2.0 * h);
}

}  // namespace oracle
