#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dbb/errors.hpp"

namespace dbb {

/// Uniform bin edges over [lo, hi].
inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return e;
}

/// Index of the bin containing v, or npos when outside [front, back).
inline std::size_t bin_index(const std::vector<double>& edges, double v) {
  if (v < edges.front() || v >= edges.back()) return static_cast<std::size_t>(-1);
  std::size_t lo = 0, hi = edges.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (v < edges[mid] ? hi : lo) = mid;
  }
  return lo;
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square goodness-of-fit. Categories with expected count below
/// `min_expected` are pooled into the following category (last pools backward).
/// dof = categories - 1 (total count fixed).
inline ChiSquareResult chi_square_test(const std::vector<double>& observed,
                                       const std::vector<double>& expected,
                                       double min_expected = 5.0) {
  if (observed.size() != expected.size())
    throw PreconditionError("chi_square_test: size mismatch");

  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (!exp.empty()) {
      obs.back() += o_acc;
      exp.back() += e_acc;
    } else {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    }
  }
  if (exp.size() < 2) throw PreconditionError("chi_square_test: fewer than 2 categories");

  ChiSquareResult r;
  for (std::size_t i = 0; i < exp.size(); ++i) {
    const double d = obs[i] - exp[i];
    r.statistic += d * d / exp[i];
  }
  r.dof = exp.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(r.dof));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

}  // namespace dbb
