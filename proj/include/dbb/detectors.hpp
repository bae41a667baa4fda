#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "dbb/errors.hpp"
#include "dbb/fields.hpp"
#include "dbb/quadrature.hpp"
#include "dbb/vec.hpp"

namespace dbb {

// ---------------------------------------------------------------------------
// Absorbing Fabry-Perot slab
// ---------------------------------------------------------------------------

/// Slab of absorbing atoms between z = 0 and z = d: density N, forward
/// scattering amplitude f0 (Im f0 >= 0), lateral area `area`.
struct SlabDetector {
  double N = 0.0;
  complexd f0{0.0, 0.0};
  double d = 1.0;
  double area = 1.0;

  /// Extinction cross-section 4 pi Im f0 / k.
  double sigma_ext(double k) const { return 4.0 * M_PI * f0.imag() / k; }
};

struct ScatterResult {
  complexd R, T;
  complexd C, D;  ///< in-slab amplitudes of e^{+ik2 z} and e^{-ik2 z}
  double absorption = 0.0;
  double k1 = 0.0;  ///< normal wavevector outside
  complexd k2;      ///< normal wavevector inside
};

/// Fresnel amplitudes of the absorbing slab for incidence angle theta.
/// The transmission coefficient is fixed by the matching conditions at both
/// interfaces, so the lossless limit satisfies |R|^2 + |T|^2 = 1.
inline ScatterResult slab_scatter(double k, double theta, const SlabDetector& slab) {
  if (!(k > 0.0)) throw PreconditionError("slab_scatter requires k > 0");
  if (!(theta >= 0.0 && theta < M_PI / 2.0))
    throw PreconditionError("slab_scatter requires 0 <= theta < pi/2");
  if (slab.f0.imag() < 0.0)
    throw PreconditionError("slab absorber requires Im f0 >= 0");

  ScatterResult res;
  const double k1 = k * std::cos(theta);
  const complexd k2 = std::sqrt(complexd(k1 * k1, 0.0) + 4.0 * M_PI * slab.f0 * slab.N);
  const complexd r = (k1 - k2) / (k1 + k2);
  const complexd delta = 2.0 * k2 * slab.d;
  const complexd eid = std::exp(complexd(0.0, 1.0) * delta);
  const complexd den = 1.0 - r * r * eid;

  res.k1 = k1;
  res.k2 = k2;
  res.R = r * (1.0 - eid) / den;
  res.C = 0.5 * ((1.0 + res.R) + (k1 / k2) * (1.0 - res.R));
  res.D = 0.5 * ((1.0 + res.R) - (k1 / k2) * (1.0 - res.R));
  res.T = res.C * (1.0 - r) * std::exp(complexd(0.0, 1.0) * (k2 - k1) * slab.d);
  res.absorption = 1.0 - std::norm(res.R) - std::norm(res.T);
  return res;
}

struct SlabBudget {
  double flux_in_minus_out = 0.0;   ///< area * v cos(theta) * (1-|R|^2-|T|^2)
  double volume_absorption = 0.0;   ///< area * N sigma_ext v * int |Psi|^2 dz
};

/// Both sides of the slab absorption budget (probability absorbed per unit
/// time): the boundary flux difference and the in-slab volume quadrature.
inline SlabBudget slab_absorption_budget(double k, double theta, const SlabDetector& slab,
                                         double quad_tol = 1e-10) {
  const ScatterResult s = slab_scatter(k, theta, slab);
  const double v = k;  // natural units, m = 1
  SlabBudget b;
  b.flux_in_minus_out = slab.area * v * std::cos(theta) * s.absorption;
  const auto rho_inside = [&](double z) {
    return std::norm(s.C * std::exp(complexd(0.0, 1.0) * s.k2 * z) +
                     s.D * std::exp(complexd(0.0, -1.0) * s.k2 * z));
  };
  const double integral = integrate_gk(rho_inside, 0.0, slab.d, quad_tol);
  b.volume_absorption = slab.area * slab.N * slab.sigma_ext(k) * v * integral;
  return b;
}

/// dBB trajectory slope dz/dx in the region containing z (before / inside /
/// after the slab).
inline double slab_trajectory_slopes(double k, double theta, const SlabDetector& slab,
                                     double z) {
  const ScatterResult s = slab_scatter(k, theta, slab);
  const double kx = k * std::sin(theta);
  if (kx == 0.0) throw PreconditionError("slope undefined at normal incidence");
  const double cot = s.k1 / kx;

  if (z >= slab.d) return cot;  // transmitted plane wave

  if (z < 0.0) {
    const double aR = std::abs(s.R);
    const double den = 1.0 + aR * aR + 2.0 * aR * std::cos(2.0 * s.k1 * z - std::arg(s.R));
    if (den <= kDensityFloor) throw NodalPointError("interference node in front of slab");
    return cot * (1.0 - aR * aR) / den;
  }

  const double k2p = s.k2.real(), k2pp = s.k2.imag();
  const double aC = std::abs(s.C), aD = std::abs(s.D);
  const double xi = 2.0 * k2p * z + std::arg(s.D) - std::arg(s.C);
  const double eCm = std::exp(-2.0 * k2pp * z), eDp = std::exp(2.0 * k2pp * z);
  const double den = aC * aC * eCm + aD * aD * eDp + 2.0 * aC * aD * std::cos(xi);
  if (den <= kDensityFloor) throw NodalPointError("node inside the slab");
  const double num =
      k2p * (aC * aC * eCm - aD * aD * eDp) + 2.0 * k2pp * aC * aD * std::sin(xi);
  return num / (kx * den);
}

/// Mean trajectory slope in the interference region, around which the
/// particle oscillates.
inline double slab_mean_incident_slope(double k, double theta, const SlabDetector& slab) {
  const ScatterResult s = slab_scatter(k, theta, slab);
  const double aR2 = std::norm(s.R);
  return (s.k1 / (k * std::sin(theta))) * (1.0 - aR2) / (1.0 + aR2);
}

// ---------------------------------------------------------------------------
// Perfectly matched layers
// ---------------------------------------------------------------------------

enum class PmlDirection { forward, backward };

/// Smooth absorption profile chi(z): constant chi0 on [0, d] with Gaussian
/// shoulders of rate a on both sides. a -> infinity recovers the step
/// profile, which is only ever used through closed-form probabilities.
struct PMLProfile {
  double chi0 = 1.0;
  double d = 1.0;
  double a = 25.0;
  PmlDirection direction = PmlDirection::forward;
  Vec3 design_k{0.0, 0.0, 2.0 * M_PI};
  double mass = 1.0;

  double xi() const { return chi0 * std::sqrt(M_PI / a); }
};

inline double pml_chi(const PMLProfile& p, double z) {
  if (z < 0.0) return p.chi0 * std::exp(-p.a * z * z);
  if (z <= p.d) return p.chi0;
  const double u = z - p.d;
  return p.chi0 * std::exp(-p.a * u * u);
}

inline double pml_chi_prime(const PMLProfile& p, double z) {
  if (z < 0.0) return -2.0 * p.chi0 * p.a * z * std::exp(-p.a * z * z);
  if (z <= p.d) return 0.0;
  const double u = z - p.d;
  return -2.0 * p.chi0 * p.a * u * std::exp(-p.a * u * u);
}

/// Integral of chi from -infinity to z (erf closed form).
inline double pml_chi_integral(const PMLProfile& p, double z) {
  const double xi = p.xi();
  if (z <= 0.0) return 0.5 * xi * (1.0 + std::erf(std::sqrt(p.a) * z));
  if (z <= p.d) return 0.5 * xi + p.chi0 * z;
  return 0.5 * xi + p.chi0 * p.d + 0.5 * xi * std::erf(std::sqrt(p.a) * (z - p.d));
}

/// Effective complex potential. Forward and backward media share the
/// imaginary part and differ by the sign in front of chi'(z).
inline complexd pml_potential(const PMLProfile& p, double z) {
  const double chi = pml_chi(p, z);
  const double chip = pml_chi_prime(p, z);
  const double kz = p.design_k.z;
  const double re = (p.direction == PmlDirection::forward)
                        ? (chi * chi - chip) / (2.0 * p.mass)
                        : (chi * chi + chip) / (2.0 * p.mass);
  return {re, -chi * kz / p.mass};
}

/// The reflectionless absorbed wave the forward profile is designed for:
/// psi(z) = e^{i k z} e^{-int chi}. For the backward profile the wave runs
/// in -z and decays toward -z.
inline complexd pml_absorbed_wave(const PMLProfile& p, double k, double z) {
  if (p.direction == PmlDirection::forward)
    return std::exp(complexd(-pml_chi_integral(p, z), k * z));
  return std::exp(complexd(-pml_chi_integral(p, p.d - z), -k * z));
}

namespace detail {

/// Extended-precision absorbed wave, so the residual check below is limited
/// by the stencil truncation error rather than input roundoff.
inline std::complex<long double> pml_absorbed_wave_ld(const PMLProfile& p, long double k,
                                                      long double z) {
  const long double xi = p.chi0 * std::sqrt(M_PIl / static_cast<long double>(p.a));
  const long double sa = std::sqrt(static_cast<long double>(p.a));
  long double w;
  if (z <= 0.0L)
    w = 0.5L * xi * (1.0L + std::erf(sa * z));
  else if (z <= static_cast<long double>(p.d))
    w = 0.5L * xi + p.chi0 * z;
  else
    w = 0.5L * xi + static_cast<long double>(p.chi0) * p.d +
        0.5L * xi * std::erf(sa * (z - p.d));
  return std::exp(std::complex<long double>(-w, k * z));
}

}  // namespace detail

/// Substitutes the erf-form absorbed wave into the stationary equation
/// psi'' + (k^2 - 2 m V) psi = 0 with a 5-point finite-difference second
/// derivative; returns max |residual| / max |k^2 psi| over a z-grid.
/// Stencils straddling the two profile joints are skipped: chi'' jumps
/// there, so the finite difference does not approximate psi'' at those
/// isolated points.
inline double verify_pml_solution(const PMLProfile& p, double k, std::size_t grid_n = 1200,
                                  double h = 1e-3) {
  if (p.direction != PmlDirection::forward)
    throw PreconditionError("verify_pml_solution expects a forward profile");
  const double pad = 4.0 / std::sqrt(p.a) + 1.0;
  const double z0 = -pad, z1 = p.d + pad;
  double max_res = 0.0, max_ref = 0.0;
  for (std::size_t i = 0; i <= grid_n; ++i) {
    const double z = z0 + (z1 - z0) * static_cast<double>(i) / static_cast<double>(grid_n);
    if (std::abs(z) <= 2.5 * h || std::abs(z - p.d) <= 2.5 * h) continue;
    using cld = std::complex<long double>;
    const cld psi = detail::pml_absorbed_wave_ld(p, k, z);
    const cld d2 = (-detail::pml_absorbed_wave_ld(p, k, z - 2 * h) +
                    16.0L * detail::pml_absorbed_wave_ld(p, k, z - h) - 30.0L * psi +
                    16.0L * detail::pml_absorbed_wave_ld(p, k, z + h) -
                    detail::pml_absorbed_wave_ld(p, k, z + 2 * h)) /
                   (12.0L * static_cast<long double>(h) * static_cast<long double>(h));
    const complexd vz = pml_potential(p, z);
    const cld res = d2 + (cld(k * k) - 2.0L * static_cast<long double>(p.mass) *
                                           cld(vz.real(), vz.imag())) *
                             psi;
    max_res = std::max(max_res, static_cast<double>(std::abs(res)));
    max_ref = std::max(max_ref, k * k * static_cast<double>(std::abs(psi)));
  }
  return max_res / max_ref;
}

/// F(xi) = (2/sqrt(pi)) int_{-inf}^{0} e^{-z^2} e^{-xi(1+erf z)} dz; F(0) = 1.
inline double pml_profile_F(double xi, double tol = 1e-10) {
  return integrate_gk(
      [xi](double z) {
        return 2.0 / std::sqrt(M_PI) * std::exp(-z * z - xi * (1.0 + std::erf(z)));
      },
      -std::numeric_limits<double>::infinity(), 0.0, tol);
}

/// G(xi) = (2/sqrt(pi)) int_{0}^{inf} e^{-z^2} e^{-xi(1+erf z)} dz; G(0) = 1.
inline double pml_profile_G(double xi, double tol = 1e-10) {
  return integrate_gk(
      [xi](double z) {
        return 2.0 / std::sqrt(M_PI) * std::exp(-z * z - xi * (1.0 + std::erf(z)));
      },
      0.0, std::numeric_limits<double>::infinity(), tol);
}

/// Step-profile detection probability: area (k/m) (1 - e^{-2 chi0 d}).
inline double pml_detection_probability_step(double chi0, double d, double k,
                                             double mass = 1.0, double area = 1.0) {
  return area * (k / mass) * (1.0 - std::exp(-2.0 * chi0 * d));
}

/// Smooth-profile detection probability
/// area (k/m) [e^{-xi}(1 - e^{-2 chi0 d}) + xi F(xi) + e^{-2 chi0 d} xi G(xi)].
inline double pml_detection_probability(const PMLProfile& p, double k, double area = 1.0,
                                        double tol = 1e-10) {
  const double xi = p.xi();
  const double e2cd = std::exp(-2.0 * p.chi0 * p.d);
  const double val = std::exp(-xi) * (1.0 - e2cd) + xi * pml_profile_F(xi, tol) +
                     e2cd * xi * pml_profile_G(xi, tol);
  return area * (k / p.mass) * val;
}

/// Direct quadrature of 2 area (k/m) int chi e^{-2 int chi} dz over the
/// whole profile, split at the joints where the integrand loses smoothness
/// (step variant restricts to [0, d]).
inline double pml_detection_probability_quadrature(const PMLProfile& p, double k,
                                                   double area = 1.0, double tol = 1e-12) {
  const double pad = 7.0 / std::sqrt(p.a);
  const auto f = [&](double z) {
    return pml_chi(p, z) * std::exp(-2.0 * pml_chi_integral(p, z));
  };
  const double val = integrate_gk(f, -pad, 0.0, tol) + integrate_gk(f, 0.0, p.d, tol) +
                     integrate_gk(f, p.d, p.d + pad, tol);
  return 2.0 * area * (k / p.mass) * val;
}

inline double pml_detection_probability_step_quadrature(double chi0, double d, double k,
                                                        double mass = 1.0,
                                                        double area = 1.0,
                                                        double tol = 1e-14) {
  const double val =
      integrate_gk([&](double z) { return chi0 * std::exp(-2.0 * chi0 * z); }, 0.0, d, tol);
  return 2.0 * area * (k / mass) * val;
}

// ---------------------------------------------------------------------------
// Direct numerical 1D scattering (independent of the erf construction):
// fixed-step RK4 on psi'' = (2 m V - k^2) psi with outgoing boundary
// conditions, then decomposition into incident + reflected parts.
// ---------------------------------------------------------------------------

struct ScatterAmplitudes {
  complexd R, T;
};

template <class Potential>
ScatterAmplitudes scatter_numeric_1d(Potential&& V, double k, double z_lo, double z_hi,
                                     double mass = 1.0, bool incident_forward = true,
                                     std::size_t n_steps = 0) {
  if (n_steps == 0)
    n_steps = static_cast<std::size_t>(
        std::max(8000.0, 120.0 * k * (z_hi - z_lo)));
  const complexd I(0.0, 1.0);

  struct State {
    complexd psi, dpsi;
  };
  auto deriv = [&](double z, const State& s) {
    return State{s.dpsi, (2.0 * mass * V(z) - k * k) * s.psi};
  };
  auto rk4 = [&](double z, const State& s, double h) {
    const State k1 = deriv(z, s);
    const State k2 = deriv(z + h / 2, {s.psi + h / 2 * k1.psi, s.dpsi + h / 2 * k1.dpsi});
    const State k3 = deriv(z + h / 2, {s.psi + h / 2 * k2.psi, s.dpsi + h / 2 * k2.dpsi});
    const State k4 = deriv(z + h, {s.psi + h * k3.psi, s.dpsi + h * k3.dpsi});
    return State{s.psi + h / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
                 s.dpsi + h / 6.0 * (k1.dpsi + 2.0 * k2.dpsi + 2.0 * k3.dpsi + k4.dpsi)};
  };

  if (incident_forward) {
    // transmitted wave T e^{ikz} beyond z_hi; integrate backward
    State s{std::exp(I * k * z_hi), I * k * std::exp(I * k * z_hi)};
    const double h = -(z_hi - z_lo) / static_cast<double>(n_steps);
    double z = z_hi;
    for (std::size_t i = 0; i < n_steps; ++i, z += h) s = rk4(z, s, h);
    const complexd A = 0.5 * (s.psi + s.dpsi / (I * k)) * std::exp(-I * k * z_lo);
    const complexd B = 0.5 * (s.psi - s.dpsi / (I * k)) * std::exp(I * k * z_lo);
    return {B / A, 1.0 / A};
  }
  // incident from +inf moving toward -z: transmitted T e^{-ikz} below z_lo
  State s{std::exp(-I * k * z_lo), -I * k * std::exp(-I * k * z_lo)};
  const double h = (z_hi - z_lo) / static_cast<double>(n_steps);
  double z = z_lo;
  for (std::size_t i = 0; i < n_steps; ++i, z += h) s = rk4(z, s, h);
  const complexd A = 0.5 * (s.psi - s.dpsi / (I * k)) * std::exp(I * k * z_hi);
  const complexd B = 0.5 * (s.psi + s.dpsi / (I * k)) * std::exp(-I * k * z_hi);
  return {B / A, 1.0 / A};
}

// ---------------------------------------------------------------------------
// Space-time 4-volume absorbers
// ---------------------------------------------------------------------------

struct SpacetimeBox {
  Vec3 lo, hi;
  double t0 = 0.0, t1 = 1.0;

  double volume3() const {
    return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  }
};

/// Scalar absorber: complex V_eff(x, t) with Im <= 0 on the active region.
struct ScalarAbsorber {
  SpacetimeBox box;
  std::function<complexd(Vec3, double)> v_eff;
};

/// Imaginary vector coupling: Im[A_eff] constant on the region, along a
/// chosen unit direction; charge e.
struct VectorAbsorber {
  SpacetimeBox box;
  Vec3 im_a;
  double charge = 1.0;
};

using SpacetimeDetector = std::variant<ScalarAbsorber, VectorAbsorber>;

struct AbsorptionResult {
  double probability = 0.0;
  bool gain = false;  ///< vector couplings may emit instead of absorb
};

/// -2 int Im[V_eff] |Psi|^2 d4x (scalar) or +2e int Im[A_eff].J d4x (vector),
/// by tensor-product quadrature over the active box. Additive over disjoint
/// regions. The scalar variant rejects Im[V_eff] > 0 anywhere in the box.
template <class Field>
AbsorptionResult spacetime_absorption(const SpacetimeDetector& det, const Field& field,
                                      double tol = 1e-8) {
  AbsorptionResult out;
  if (const auto* sc = std::get_if<ScalarAbsorber>(&det)) {
    const auto& b = sc->box;
    const std::array<double, 4> lo{b.lo.x, b.lo.y, b.lo.z, b.t0};
    const std::array<double, 4> hi{b.hi.x, b.hi.y, b.hi.z, b.t1};
    out.probability = integrate_box<4>(
        [&](const std::array<double, 4>& q) {
          const Vec3 x{q[0], q[1], q[2]};
          const double im_v = sc->v_eff(x, q[3]).imag();
          if (im_v > 1e-12)
            throw PreconditionError("scalar absorber requires Im[V_eff] <= 0");
          return -2.0 * im_v * density(field, x, q[3]);
        },
        lo, hi, tol);
    return out;
  }
  const auto& vc = std::get<VectorAbsorber>(det);
  const auto& b = vc.box;
  const std::array<double, 4> lo{b.lo.x, b.lo.y, b.lo.z, b.t0};
  const std::array<double, 4> hi{b.hi.x, b.hi.y, b.hi.z, b.t1};
  out.probability = integrate_box<4>(
      [&](const std::array<double, 4>& q) {
        const Vec3 x{q[0], q[1], q[2]};
        return 2.0 * vc.charge * dot(vc.im_a, current(field, x, q[3]));
      },
      lo, hi, tol);
  out.gain = out.probability < 0.0;
  return out;
}

/// Stationary absorbed plane wave behind a forward PML profile, as a field
/// the 4-volume quadrature can consume (rho and current only).
struct PmlAbsorbedWave {
  PMLProfile profile;
  double k = 2.0 * M_PI;
  double mass = 1.0;
};

inline double density(const PmlAbsorbedWave& w, Vec3 x, double /*t*/) {
  return std::exp(-2.0 * pml_chi_integral(w.profile, x.z));
}

inline Vec3 current(const PmlAbsorbedWave& w, Vec3 x, double t) {
  return {0.0, 0.0, (w.k / w.mass) * density(w, x, t)};
}

// ---------------------------------------------------------------------------
// Huygens scattered field of a finite detector aperture
// ---------------------------------------------------------------------------

/// Rectangular input face of a detector: the patch
/// [cx - hx, cx + hx] x [cy - hy, cy + hy] on the plane z = cz.
struct AperturePatch {
  Vec3 center;
  double half_x = 1.0;
  double half_y = 1.0;
};

/// Huygens-Fresnel scattered field of the detector input face for a
/// stationary incident field: the patch integral of
/// (e^{ikR}/4 pi R)(ik R_hat.z_hat + i k_z) e^{i k_par.(x1 - x0)} times
/// Psi0(x0), with an overall -1 when the local current is counter-propagating
/// (backflow flag).
inline complexd scattered_field(const AperturePatch& ap, const WaveField& field, Vec3 x,
                                bool backflow, double tol = 1e-8) {
  const auto energy = field.energy();
  if (!energy) throw PreconditionError("scattered_field requires a stationary field");
  const double k = std::sqrt(2.0 * field.mass * *energy);
  if (std::abs(x.z - ap.center.z) < 1e-9)
    throw PreconditionError("observation point lies in the aperture plane");

  const Vec3 x0 = ap.center;
  const double rho0 = density(field, x0, 0.0);
  if (rho0 <= kDensityFloor)
    throw NodalPointError("aperture center sits on a node");
  const Vec3 k_eff = field.mass * current(field, x0, 0.0) / rho0;
  const double kz = k_eff.z;
  const Vec3 k_par{k_eff.x, k_eff.y, 0.0};
  const complexd psi0 = field_value(field, x0, 0.0).psi[0];
  const complexd I(0.0, 1.0);

  const std::array<double, 2> lo{x0.x - ap.half_x, x0.y - ap.half_y};
  const std::array<double, 2> hi{x0.x + ap.half_x, x0.y + ap.half_y};
  const complexd integral = integrate_box<2>(
      [&](const std::array<double, 2>& q) {
        const Vec3 x1{q[0], q[1], x0.z};
        const Vec3 Rv = x - x1;
        const double R = norm(Rv);
        const double cosz = Rv.z / R;
        const Vec3 dx1 = x1 - x0;
        return std::exp(I * (k * R + dot(k_par, dx1))) / (4.0 * M_PI * R) * I *
               (k * cosz + kz);
      },
      lo, hi, tol, 8, 512);

  return (backflow ? -1.0 : 1.0) * psi0 * integral;
}

}  // namespace dbb
