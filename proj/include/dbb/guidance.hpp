#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include "dbb/errors.hpp"
#include "dbb/fields.hpp"
#include "dbb/rng.hpp"
#include "dbb/vec.hpp"

namespace dbb {

// ---------------------------------------------------------------------------
// Surfaces
// ---------------------------------------------------------------------------

struct PlaneZ {
  double z = 0.0;
  /// Half-width of the quadrature patch in x and y; infinite means the
  /// support is truncated adaptively from the field.
  double half_width = std::numeric_limits<double>::infinity();
};

struct PlaneX {
  double x = 0.0;
};

struct Disk {
  double z = 0.0;
  double radius = 1.0;
};

struct Surface {
  std::variant<PlaneZ, PlaneX, Disk> shape;

  double signed_distance(Vec3 p) const {
    return std::visit(
        [&](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, PlaneX>)
            return p.x - s.x;
          else
            return p.z - s.z;
        },
        shape);
  }

  Vec3 normal() const {
    return std::holds_alternative<PlaneX>(shape) ? Vec3{1, 0, 0} : Vec3{0, 0, 1};
  }

  /// Whether a point on the carrier plane counts as a hit (Disk is bounded).
  bool contains(Vec3 p) const {
    if (const auto* d = std::get_if<Disk>(&shape))
      return p.x * p.x + p.y * p.y <= d->radius * d->radius;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct TrajectorySample {
  double t;
  Vec3 x;
  Vec3 v;
};

enum class TrajectoryStatus { ok, halted_node, halted_step };

struct IntegratorStats {
  std::uint64_t steps = 0;
  std::uint64_t rejected = 0;
  double min_density = std::numeric_limits<double>::infinity();
};

/// Time-ordered samples of one dBB path at the integrator's accepted steps,
/// with cubic-Hermite dense output between them.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  IntegratorStats stats;
  TrajectoryStatus status = TrajectoryStatus::ok;

  double t_begin() const { return samples.front().t; }
  double t_end() const { return samples.back().t; }

  /// Hermite interpolation inside the accepted-step grid.
  Vec3 position(double t) const {
    const auto [i, u, h] = locate(t);
    const TrajectorySample& a = samples[i];
    const TrajectorySample& b = samples[i + 1];
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
    const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
    return h00 * a.x + (h10 * h) * a.v + h01 * b.x + (h11 * h) * b.v;
  }

  Vec3 velocity_at(double t) const {
    const auto [i, u, h] = locate(t);
    const TrajectorySample& a = samples[i];
    const TrajectorySample& b = samples[i + 1];
    const double u2 = u * u;
    const double d00 = (6 * u2 - 6 * u) / h, d10 = 3 * u2 - 4 * u + 1;
    const double d01 = (-6 * u2 + 6 * u) / h, d11 = 3 * u2 - 2 * u;
    return d00 * a.x + d10 * a.v + d01 * b.x + d11 * b.v;
  }

 private:
  std::tuple<std::size_t, double, double> locate(double t) const {
    if (samples.size() < 2 || t <= samples.front().t) return {0, 0.0, 1.0};
    if (t >= samples.back().t)
      return {samples.size() - 2, 1.0, samples[samples.size() - 1].t - samples[samples.size() - 2].t};
    std::size_t lo = 0, hi = samples.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (t < samples[mid].t ? hi : lo) = mid;
    }
    const double h = samples[lo + 1].t - samples[lo].t;
    return {lo, (t - samples[lo].t) / h, h};
  }
};

// ---------------------------------------------------------------------------
// Adaptive embedded Runge-Kutta 4(5), Dormand-Prince coefficients.
// Error controlled per unit step so that the global deviation scales
// linearly with tol.
// ---------------------------------------------------------------------------

namespace detail {

struct Dopri5 {
  // Butcher tableau
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  template <class F>
  static void step(F&& f, double t, const Vec3& y, double h, const Vec3& k1, Vec3& y5,
                   Vec3& err, Vec3& k_last) {
    const Vec3 k2 = f(t + c2 * h, y + h * (1.0 / 5) * k1);
    const Vec3 k3 = f(t + c3 * h, y + h * ((3.0 / 40) * k1 + (9.0 / 40) * k2));
    const Vec3 k4 =
        f(t + c4 * h, y + h * ((44.0 / 45) * k1 - (56.0 / 15) * k2 + (32.0 / 9) * k3));
    const Vec3 k5 = f(t + c5 * h, y + h * ((19372.0 / 6561) * k1 - (25360.0 / 2187) * k2 +
                                           (64448.0 / 6561) * k3 - (212.0 / 729) * k4));
    const Vec3 k6 = f(t + h, y + h * ((9017.0 / 3168) * k1 - (355.0 / 33) * k2 +
                                      (46732.0 / 5247) * k3 + (49.0 / 176) * k4 -
                                      (5103.0 / 18656) * k5));
    y5 = y + h * ((35.0 / 384) * k1 + (500.0 / 1113) * k3 + (125.0 / 192) * k4 -
                  (2187.0 / 6784) * k5 + (11.0 / 84) * k6);
    const Vec3 k7 = f(t + h, y5);
    // 5th-minus-4th order embedded difference
    err = h * ((71.0 / 57600) * k1 - (71.0 / 16695) * k3 + (71.0 / 1920) * k4 -
               (17253.0 / 339200) * k5 + (22.0 / 525) * k6 - (1.0 / 40) * k7);
    k_last = k7;
  }
};

}  // namespace detail

/// Integrates dx/dt = J/rho from (x0, t0) to t1 with local error per unit
/// step bounded by tol. Trajectories halting at nodes are returned partial
/// with the halted_node flag; a vanishing step size raises halted_step.
inline Trajectory integrate_trajectory(const WaveField& field, Vec3 x0, double t0,
                                       double t1, double tol = 1e-8) {
  if (!(t1 > t0)) throw PreconditionError("integrate_trajectory requires t1 > t0");
  if (density(field, x0, t0) <= kDensityFloor)
    throw PreconditionError("integrate_trajectory started at a nodal point");

  Trajectory traj;
  auto rhs = [&](double t, Vec3 x) { return velocity(field, x, t); };

  double t = t0;
  Vec3 x = x0;
  Vec3 k1 = rhs(t, x);
  traj.samples.push_back({t, x, k1});
  traj.stats.min_density = density(field, x, t);

  const double span = t1 - t0;
  const double h_min = span * 1e-14;

  // initial step from the local velocity and curvature (Hairer-style probe)
  double h;
  {
    const double d0 = 1.0 + norm(x);
    const double d1 = norm(k1);
    double h0 = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-3 * span;
    h0 = std::min(h0, span);
    Vec3 v1;
    try {
      v1 = rhs(t + h0, x + h0 * k1);
    } catch (const NodalPointError&) {
      v1 = k1;
    }
    const double d2 = norm(v1 - k1) / h0;
    const double m = std::max(d1 / d0, d2 / d0);
    const double h1 = (m > 1e-12) ? std::pow(0.01 * tol / m, 0.25) : 100.0 * h0;
    h = std::min({100.0 * h0, h1, span});
  }

  while (t < t1) {
    h = std::min(h, t1 - t);
    Vec3 y5, err, k_last;
    bool nodal = false;
    try {
      detail::Dopri5::step(rhs, t, x, h, k1, y5, err, k_last);
    } catch (const NodalPointError&) {
      nodal = true;
    }
    if (nodal) {
      traj.status = TrajectoryStatus::halted_node;
      return traj;
    }

    const double scale = 1.0 + norm(x);
    const double err_norm = norm(err) / (scale * tol * h);  // error per unit step
    const double fac = 0.9 * std::pow(std::max(err_norm, 1e-12), -0.25);
    if (err_norm <= 1.0) {
      t += h;
      x = y5;
      k1 = k_last;
      traj.samples.push_back({t, x, k1});
      ++traj.stats.steps;
      traj.stats.min_density = std::min(traj.stats.min_density, density(field, x, t));
      h *= std::clamp(fac, 0.2, 8.0);
    } else {
      ++traj.stats.rejected;
      h *= std::clamp(fac, 0.1, 0.9);
      if (h < h_min) {
        traj.status = TrajectoryStatus::halted_step;
        return traj;
      }
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Crossing detection
// ---------------------------------------------------------------------------

struct CrossingEvent {
  double time;
  Vec3 position;
  int direction_sign;  ///< sign of J.n at the crossing
  int order_index;     ///< 1 = first crossing
};

/// All sign changes of the signed distance along the dense output, located
/// by bisection to 1e-10 in time. Grazing contact (touching without a sign
/// change) does not count; a zero exactly on a scan point belongs to the
/// crossing bracket of its nonzero neighbours. Disk crossings additionally
/// require the hit point inside the disk.
inline std::vector<CrossingEvent> detect_crossings(const Trajectory& traj,
                                                   const Surface& surface) {
  std::vector<CrossingEvent> events;
  if (traj.samples.size() < 2) return events;

  constexpr int kSubdiv = 8;  // guards against several crossings inside one step
  const double t_tol = 1e-10;

  auto sdist = [&](double t) { return surface.signed_distance(traj.position(t)); };

  // previous scan point with a nonzero signed distance
  double prev_t = traj.samples.front().t;
  double prev_f = sdist(prev_t);

  auto scan_point = [&](double t) {
    const double f = sdist(t);
    if (f == 0.0) return;  // tangency or knot zero: decided by the neighbours
    if (prev_f != 0.0 && prev_f * f < 0.0) {
      double lo = prev_t, hi = t, flo = prev_f;
      while (hi - lo > t_tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = sdist(mid);
        if (fm == 0.0 || flo * fm < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          flo = fm;
        }
      }
      const double tc = 0.5 * (lo + hi);
      const Vec3 pc = traj.position(tc);
      if (surface.contains(pc)) events.push_back({tc, pc, f > 0.0 ? +1 : -1, 0});
    }
    prev_t = t;
    prev_f = f;
  };

  for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    const double ta = traj.samples[i].t;
    const double tb = traj.samples[i + 1].t;
    for (int s = 1; s <= kSubdiv; ++s) scan_point(ta + (tb - ta) * s / kSubdiv);
  }
  for (std::size_t i = 0; i < events.size(); ++i)
    events[i].order_index = static_cast<int>(i) + 1;
  return events;
}

/// dBB first instant of arrival: min crossing time, absent when the
/// trajectory never reaches the surface.
inline std::optional<double> first_arrival(const Trajectory& traj, const Surface& surface) {
  const auto events = detect_crossings(traj, surface);
  if (events.empty()) return std::nullopt;
  return events.front().time;
}

// ---------------------------------------------------------------------------
// Born sampling
// ---------------------------------------------------------------------------

/// n independent draws from rho/int(rho) by rejection sampling over `box`
/// (default: the field's sampling box). Deterministic given the seed.
inline std::vector<Vec3> sample_initial(const WaveField& field, double t0, std::size_t n,
                                        std::uint64_t seed,
                                        std::optional<Box> box_opt = std::nullopt) {
  const Box box = box_opt ? *box_opt : default_sampling_box(field, t0);
  const double bound = density_upper_bound(field, t0) * (1.0 + 1e-9);

  std::vector<Vec3> out;
  out.reserve(n);
  Rng rng = stream_rng(seed, 0x626f726eULL);

  std::uint64_t proposals = 0;
  while (out.size() < n) {
    const Vec3 x{rng.uniform(box.lo.x, box.hi.x), rng.uniform(box.lo.y, box.hi.y),
                 rng.uniform(box.lo.z, box.hi.z)};
    const double u = rng.uniform01();
    ++proposals;
    const double rho = density(field, x, t0);
    if (rho > bound)
      throw SamplingBoxError("density exceeded its upper bound during sampling");
    if (u * bound < rho) out.push_back(x);
    if (proposals >= 50000 && out.size() < proposals / 10000)
      throw SamplingBoxError("rejection acceptance rate below 1e-4");
  }
  return out;
}

}  // namespace dbb
