#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "dbb/errors.hpp"
#include "dbb/fields.hpp"
#include "dbb/guidance.hpp"
#include "dbb/parallel.hpp"
#include "dbb/quadrature.hpp"
#include "dbb/stats.hpp"
#include "dbb/vec.hpp"

namespace dbb {

// ---------------------------------------------------------------------------
// Ideal dBB flux distribution
// ---------------------------------------------------------------------------

namespace detail {

/// Quadrature patch covering the field support on the surface plane.
inline std::array<double, 4> surface_patch(const WaveField& field, const Surface& surface,
                                           double t) {
  const Box b = default_sampling_box(field, t);
  // widen by a third so |J| tails are inside
  auto widen = [](double lo, double hi) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo) * 1.34;
    return std::pair<double, double>{c - h, c + h};
  };
  if (std::holds_alternative<PlaneX>(surface.shape)) {
    const auto [ylo, yhi] = widen(b.lo.y, b.hi.y);
    const auto [zlo, zhi] = widen(b.lo.z, b.hi.z);
    return {ylo, yhi, zlo, zhi};
  }
  const auto [xlo, xhi] = widen(b.lo.x, b.hi.x);
  const auto [ylo, yhi] = widen(b.lo.y, b.hi.y);
  return {xlo, xhi, ylo, yhi};
}

}  // namespace detail

/// int_Sigma |J.n| dSigma at one instant. The absolute value matters: with
/// backflow, flux from the wrong side still counts as arriving probability.
inline double surface_flux_abs(const WaveField& field, const Surface& surface, double t,
                               double tol = 1e-7) {
  if (const auto* disk = std::get_if<Disk>(&surface.shape)) {
    const std::array<double, 2> lo{0.0, 0.0};
    const std::array<double, 2> hi{disk->radius, 2.0 * M_PI};
    return integrate_box<2>(
        [&](const std::array<double, 2>& q) {
          const double rho = q[0], phi = q[1];
          const Vec3 x{rho * std::cos(phi), rho * std::sin(phi), disk->z};
          return rho * std::abs(current(field, x, t).z);
        },
        lo, hi, tol, 2);
  }
  if (const auto* px = std::get_if<PlaneX>(&surface.shape)) {
    const auto patch = detail::surface_patch(field, surface, t);
    return integrate_box<2>(
        [&](const std::array<double, 2>& q) {
          const Vec3 x{px->x, q[0], q[1]};
          return std::abs(current(field, x, t).x);
        },
        {patch[0], patch[2]}, {patch[1], patch[3]}, tol, 2);
  }
  const auto& pz = std::get<PlaneZ>(surface.shape);
  double xlo, xhi, ylo, yhi;
  if (std::isfinite(pz.half_width)) {
    xlo = ylo = -pz.half_width;
    xhi = yhi = pz.half_width;
  } else {
    const auto patch = detail::surface_patch(field, surface, t);
    xlo = patch[0];
    xhi = patch[1];
    ylo = patch[2];
    yhi = patch[3];
  }
  return integrate_box<2>(
      [&](const std::array<double, 2>& q) {
        const Vec3 x{q[0], q[1], pz.z};
        return std::abs(current(field, x, t).z);
      },
      {xlo, ylo}, {xhi, yhi}, tol, 2);
}

inline std::vector<double> ideal_flux_distribution(const WaveField& field,
                                                   const Surface& surface,
                                                   const std::vector<double>& times,
                                                   double tol = 1e-7) {
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    out[i] = surface_flux_abs(field, surface, times[i], tol);
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo arrival histograms
// ---------------------------------------------------------------------------

/// Binned arrival counts with post-selection classes. Counts are integers so
/// per-worker partial histograms merge associatively.
struct ArrivalHistogram {
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> first;             ///< first crossings
  std::vector<std::uint64_t> all;               ///< every crossing
  std::map<int, std::vector<std::uint64_t>> by_order;  ///< k-th crossing, k <= 8
  std::vector<std::uint64_t> all_positive;      ///< crossings with J.n > 0
  std::vector<std::uint64_t> all_negative;
  std::uint64_t n_total = 0;
  std::uint64_t n_lost = 0;       ///< node-trapped / step-failed paths
  std::uint64_t n_noarrival = 0;  ///< no crossing before t_max

  std::size_t bins() const { return bin_edges.size() - 1; }

  std::size_t bin_of(double tau) const {
    if (tau == bin_edges.back()) return bins() - 1;
    return bin_index(bin_edges, tau);
  }

  void merge(const ArrivalHistogram& other) {
    for (std::size_t i = 0; i < first.size(); ++i) {
      first[i] += other.first[i];
      all[i] += other.all[i];
      all_positive[i] += other.all_positive[i];
      all_negative[i] += other.all_negative[i];
    }
    for (const auto& [k, v] : other.by_order) {
      auto& mine = by_order[k];
      if (mine.empty()) mine.assign(bins(), 0);
      for (std::size_t i = 0; i < v.size(); ++i) mine[i] += v[i];
    }
    n_total += other.n_total;
    n_lost += other.n_lost;
    n_noarrival += other.n_noarrival;
  }

  double first_mass() const {
    std::uint64_t c = 0;
    for (auto v : first) c += v;
    return n_total ? static_cast<double>(c) / static_cast<double>(n_total) : 0.0;
  }
};

struct McArrivalOptions {
  std::size_t n = 10000;
  std::uint64_t seed = 1;
  double t0 = 0.0;
  double t_max = 10.0;
  double tol = 1e-8;
  std::size_t bins = 200;
  unsigned threads = 0;
  std::optional<Box> sampling_box;
  int max_order = 8;
};

/// Born-samples x0 ~ rho(., t0), integrates each path, and bins first and
/// k-th crossing times of the surface. Deterministic given the seed and
/// independent of the worker count.
inline ArrivalHistogram mc_first_arrival(const WaveField& field, const Surface& surface,
                                         const McArrivalOptions& opt) {
  if (opt.n < 1) throw PreconditionError("mc_first_arrival requires n >= 1");
  if (!std::isfinite(opt.t_max) || !(opt.t_max > opt.t0))
    throw PreconditionError("mc_first_arrival requires finite t_max > t0");

  ArrivalHistogram h;
  h.bin_edges = uniform_edges(opt.t0, opt.t_max, opt.bins);
  h.first.assign(opt.bins, 0);
  h.all.assign(opt.bins, 0);
  h.all_positive.assign(opt.bins, 0);
  h.all_negative.assign(opt.bins, 0);
  h.n_total = opt.n;

  const std::vector<Vec3> starts =
      sample_initial(field, opt.t0, opt.n, opt.seed, opt.sampling_box);

  struct PathResult {
    bool lost = false;
    std::vector<CrossingEvent> events;
  };
  std::vector<PathResult> results(opt.n);

  parallel_for(
      opt.n,
      [&](std::size_t i) {
        Trajectory traj;
        try {
          traj = integrate_trajectory(field, starts[i], opt.t0, opt.t_max, opt.tol);
        } catch (const PreconditionError&) {
          results[i].lost = true;
          return;
        }
        if (traj.status != TrajectoryStatus::ok) {
          results[i].lost = true;
          return;
        }
        results[i].events = detect_crossings(traj, surface);
      },
      opt.threads);

  for (const auto& r : results) {
    if (r.lost) {
      ++h.n_lost;
      continue;
    }
    if (r.events.empty()) {
      ++h.n_noarrival;
      continue;
    }
    for (const auto& ev : r.events) {
      const std::size_t b = h.bin_of(ev.time);
      if (b >= h.bins()) continue;
      h.all[b] += 1;
      (ev.direction_sign > 0 ? h.all_positive : h.all_negative)[b] += 1;
      if (ev.order_index == 1) h.first[b] += 1;
      if (ev.order_index <= opt.max_order) {
        auto& v = h.by_order[ev.order_index];
        if (v.empty()) v.assign(h.bins(), 0);
        v[b] += 1;
      }
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Analytic arrival distribution of the guided convective current
// ---------------------------------------------------------------------------

struct DDParams {
  double L = 1.0;
  double lambda0 = 1.0;
  std::vector<double> tau_grid;
};

/// P(tau, L) = (4 L^3 / (lambda0 sqrt(pi))) tau e^{-L^2/(1+tau^2)} (1+tau^2)^{-5/2}.
inline std::vector<double> dd_analytic(const DDParams& p) {
  if (!(p.L > 0.0) || !(p.lambda0 > 0.0))
    throw PreconditionError("dd_analytic requires L > 0 and lambda0 > 0");
  for (std::size_t i = 0; i < p.tau_grid.size(); ++i) {
    if (p.tau_grid[i] < 0.0 || (i > 0 && p.tau_grid[i] <= p.tau_grid[i - 1]))
      throw PreconditionError("dd_analytic requires a strictly increasing grid, tau >= 0");
  }
  const double pref = 4.0 * p.L * p.L * p.L / (p.lambda0 * std::sqrt(M_PI));
  std::vector<double> out(p.tau_grid.size());
  for (std::size_t i = 0; i < p.tau_grid.size(); ++i) {
    const double tau = p.tau_grid[i];
    const double one = 1.0 + tau * tau;
    out[i] = pref * tau * std::exp(-p.L * p.L / one) / std::pow(one, 2.5);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-signal distribution (no post-selection)
// ---------------------------------------------------------------------------

struct FullSignal {
  std::vector<double> values;          ///< eta * int J_z dSigma (full Pauli current)
  std::vector<double> spin_residuals;  ///< phi-integrated spin term (must vanish)
};

/// eta int_disk J_z dSigma with the full Pauli current. The phi-integral of
/// the spin-magnetic term over the complete cross-section vanishes; it is
/// evaluated explicitly and reported as a residual diagnostic.
inline FullSignal full_signal_distribution(const WaveField& field, const Surface& disk,
                                           double eta, const std::vector<double>& times,
                                           double tol = 1e-10) {
  const auto* wg = std::get_if<WaveguideSpinField>(&field.model);
  if (!wg) throw PreconditionError("full_signal_distribution requires a waveguide field");
  const auto* d = std::get_if<Disk>(&disk.shape);
  if (!d) throw PreconditionError("full_signal_distribution requires a disk cross-section");

  FullSignal out;
  out.values.reserve(times.size());
  out.spin_residuals.reserve(times.size());

  constexpr int n_phi = 64;  // trapezoid is spectrally exact for the phi loop
  for (double t : times) {
    const double conv = 2.0 * M_PI *
                        integrate_gk(
                            [&](double rho) {
                              const Vec3 x{rho, 0.0, d->z};
                              return rho * pauli_current_parts(field, x, t).convective.z;
                            },
                            0.0, d->radius, tol);
    const double spin = integrate_gk(
        [&](double rho) {
          double phi_sum = 0.0;
          for (int j = 0; j < n_phi; ++j) {
            const double phi = 2.0 * M_PI * j / n_phi;
            const Vec3 x{rho * std::cos(phi), rho * std::sin(phi), d->z};
            phi_sum += pauli_current_parts(field, x, t).spin.z;
          }
          return rho * phi_sum * (2.0 * M_PI / n_phi);
        },
        0.0, d->radius, std::max(tol, 1e-12));
    out.values.push_back(eta * (conv + spin));
    out.spin_residuals.push_back(eta * spin);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Which-path retrodiction for the double slit
// ---------------------------------------------------------------------------

struct WhichPathResult {
  double p_plus = 0.0;
  double p_minus = 0.0;
  /// The spatial-projector retrodiction is valid only for chi_rel = 0 or pi.
  bool retrodictive = false;
};

/// Initial-support overlap mass int min(rho_+, rho_-) dx (reduced to the
/// slit axis; the transverse factors integrate to one).
inline double double_slit_overlap_mass(const DoubleSlit& d, double mass = 1.0) {
  const Gauss1D plus{+d.separation / 2.0, d.sigma0, d.momentum.x, mass};
  const Gauss1D minus{-d.separation / 2.0, d.sigma0, d.momentum.x, mass};
  const auto f = [&](double x) {
    return std::min(std::norm(plus.value(x, 0.0)), std::norm(minus.value(x, 0.0)));
  };
  const double inf = std::numeric_limits<double>::infinity();
  return integrate_gk(f, -inf, 0.0, 1e-12) + integrate_gk(f, 0.0, inf, 1e-12);
}

/// P(came from the packet at +a/2) = int_{x>=0} |Psi|^2 d3x, as the spatial
/// projector of the retrodiction argument, for the general superposition
/// alpha Psi_+ + beta Psi_-. Requires disjoint initial supports (overlap
/// mass below 1e-6).
inline WhichPathResult which_path_amplitudes(const DoubleSlit& d, double mass, double t,
                                             complexd alpha, complexd beta,
                                             double quad_tol = 1e-10) {
  if (double_slit_overlap_mass(d, mass) >= 1e-6)
    throw OverlapError("initial wave-packet supports overlap (mass >= 1e-6)");

  // The y and z factors are common to both packets and integrate to one,
  // so only the slit-axis factor matters.
  const Gauss1D plus{+d.separation / 2.0, d.sigma0, d.momentum.x, mass};
  const Gauss1D minus{-d.separation / 2.0, d.sigma0, d.momentum.x, mass};
  const double ov = detail::double_slit_overlap(d);
  const double norm2_psi = std::norm(alpha) + std::norm(beta) +
                           2.0 * (std::conj(alpha) * beta).real() * ov;
  if (!(norm2_psi > 0.0)) throw PreconditionError("which_path: null superposition");
  const double n = 1.0 / std::sqrt(norm2_psi);
  const auto rho_x = [&](double x) {
    return std::norm(n * (alpha * plus.value(x, t) + beta * minus.value(x, t)));
  };
  const double inf = std::numeric_limits<double>::infinity();
  WhichPathResult r;
  r.p_plus = integrate_gk(rho_x, 0.0, inf, quad_tol);
  r.p_minus = integrate_gk(rho_x, -inf, 0.0, quad_tol);
  // the spatial-projector retrodiction relies on the symmetric cases only
  const bool equal_weight = std::abs(std::abs(alpha) - std::abs(beta)) < 1e-12;
  const double chi = std::remainder(std::arg(beta) - std::arg(alpha), 2.0 * M_PI);
  r.retrodictive =
      equal_weight && (std::abs(chi) < 1e-12 || std::abs(std::abs(chi) - M_PI) < 1e-12);
  return r;
}

inline WhichPathResult which_path(const WaveField& field, double t, double quad_tol = 1e-10) {
  const auto* d = std::get_if<DoubleSlit>(&field.model);
  if (!d) throw PreconditionError("which_path requires a double-slit field");
  return which_path_amplitudes(*d, field.mass, t, complexd(1.0),
                               std::polar(1.0, d->chi_rel), quad_tol);
}

}  // namespace dbb
