#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dbb/errors.hpp"

namespace dbb {

/// Adaptive Gauss-Kronrod on [a, b] (either bound may be infinite).
/// Throws QuadratureError when the error estimate exceeds the tolerance.
template <class F>
double integrate_gk(F&& f, double a, double b, double tol = 1e-10,
                    unsigned max_depth = 15) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, max_depth, tol, &err);
  if (!(err <= tol * std::max(1.0, std::abs(v)) * 10.0 + tol)) {
    throw QuadratureError("gauss-kronrod did not converge: error estimate " +
                          std::to_string(err));
  }
  return v;
}

namespace detail {

/// Composite fixed-order Gauss-Legendre over [a, b] with m panels.
template <class F>
auto gauss_panels(F&& f, double a, double b, std::size_t m) {
  using rule = boost::math::quadrature::gauss<double, 10>;
  using value_t = decltype(f(a));
  const double h = (b - a) / static_cast<double>(m);
  value_t acc{};
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = a + h * static_cast<double>(i);
    acc += rule::integrate(f, lo, lo + h);
  }
  return acc;
}

}  // namespace detail

/// Tensor-product quadrature over an axis-aligned box. The panel count is
/// refined per dimension: each round probes a doubling of every dimension
/// separately and keeps the ones that still move the estimate, so smooth
/// (or constant) directions stay cheap. Works for real- and complex-valued
/// integrands.
template <std::size_t D, class F>
auto integrate_box(F&& f, const std::array<double, D>& lo,
                   const std::array<double, D>& hi, double tol = 1e-8,
                   std::size_t m0 = 1, std::size_t m_max = 256) {
  using value_t = std::invoke_result_t<F&, const std::array<double, D>&>;

  std::array<std::size_t, D> m;
  m.fill(m0);

  auto eval = [&](const std::array<std::size_t, D>& panels) {
    std::array<double, D> x{};
    std::function<value_t(std::size_t)> rec = [&](std::size_t dim) -> value_t {
      if (dim == D) return f(static_cast<const std::array<double, D>&>(x));
      return detail::gauss_panels(
          [&](double t) {
            x[dim] = t;
            return rec(dim + 1);
          },
          lo[dim], hi[dim], panels[dim]);
    };
    return rec(0);
  };

  value_t base = eval(m);
  for (int round = 0; round < 24; ++round) {
    const double scale = std::max(1.0, std::abs(base));
    std::array<double, D> delta{};
    std::array<value_t, D> probe{};
    double worst = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      auto m2 = m;
      m2[d] *= 2;
      probe[d] = eval(m2);
      delta[d] = std::abs(probe[d] - base);
      worst = std::max(worst, delta[d]);
    }
    if (worst <= tol * scale) return base;
    bool grew = false;
    for (std::size_t d = 0; d < D; ++d) {
      if (delta[d] > 0.25 * tol * scale && m[d] * 2 <= m_max) {
        m[d] *= 2;
        grew = true;
      }
    }
    if (!grew) throw QuadratureError("tensor-product quadrature did not converge");
    base = eval(m);
  }
  throw QuadratureError("tensor-product quadrature did not converge");
}

}  // namespace dbb
