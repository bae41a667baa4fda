#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "dbb/errors.hpp"
#include "dbb/vec.hpp"

namespace dbb {

/// Natural units: hbar = 1, default particle mass 1.
inline constexpr double kDensityFloor = 1e-12;
inline constexpr double kFdStep = 1e-4;

// ---------------------------------------------------------------------------
// Spin
// ---------------------------------------------------------------------------

/// Unit vector giving the spin direction.
struct SpinVector {
  Vec3 s{0.0, 0.0, 1.0};

  bool is_unit(double tol = 1e-12) const { return std::abs(norm(s) - 1.0) <= tol; }
};

/// Two-component spinor chi with chi^dag sigma chi equal to a given spin
/// direction.
struct Spinor {
  std::array<complexd, 2> c{{1.0, 0.0}};

  /// Algebraic construction; cardinal directions come out with exact zero
  /// components, so spin reversals reverse quantities bit-exactly.
  static Spinor from_spin(const SpinVector& sv) {
    const Vec3 s = sv.s;
    Spinor chi;
    if (s.z <= -1.0 + 1e-15) {
      chi.c[0] = 0.0;
      chi.c[1] = 1.0;
      return chi;
    }
    const double c0 = std::sqrt((1.0 + s.z) / 2.0);
    chi.c[0] = c0;
    chi.c[1] = complexd(s.x, s.y) / (2.0 * c0);
    return chi;
  }

  double norm2() const { return std::norm(c[0]) + std::norm(c[1]); }

  /// Expectation chi^dag sigma chi.
  Vec3 bloch() const {
    const complexd cross = std::conj(c[0]) * c[1];
    return {2.0 * cross.real(), 2.0 * cross.imag(), std::norm(c[0]) - std::norm(c[1])};
  }
};

// ---------------------------------------------------------------------------
// Field models
// ---------------------------------------------------------------------------

/// 1D freely evolving Gaussian. Center c, initial width sigma0, momentum p.
struct Gauss1D {
  double c = 0.0;
  double sigma0 = 1.0;
  double p = 0.0;
  double m = 1.0;

  complexd beta(double t) const { return {1.0, t / (m * sigma0 * sigma0)}; }

  complexd value(double x, double t) const {
    const complexd b = beta(t);
    const double u = x - c;
    const double w = u - p * t / m;
    const complexd expo = complexd(0.0, p * u - p * p * t / (2.0 * m)) -
                          w * w / (2.0 * sigma0 * sigma0 * b);
    const double norm_c = std::pow(M_PI * sigma0 * sigma0, -0.25);
    return norm_c / std::sqrt(b) * std::exp(expo);
  }

  /// d(log psi)/dx.
  complexd dlog(double x, double t) const {
    const double w = x - c - p * t / m;
    return complexd(0.0, p) - w / (sigma0 * sigma0 * beta(t));
  }

  /// psi''/psi = dlog^2 + dlog'.
  complexd d2_over_psi(double x, double t) const {
    const complexd d = dlog(x, t);
    return d * d - 1.0 / (sigma0 * sigma0 * beta(t));
  }

  double spread(double t) const {
    const double tau = t / (m * sigma0 * sigma0);
    return sigma0 * std::sqrt(1.0 + tau * tau);
  }
};

struct PlaneWave {
  Vec3 k;
};

struct GaussianPacket {
  Vec3 center;
  double sigma0 = 1.0;
  Vec3 momentum;
};

/// Two identical packets released at x = +/- separation/2, relative phase
/// chi_rel on the lower one.
struct DoubleSlit {
  double separation = 8.0;
  double sigma0 = 1.0;
  Vec3 momentum{0.0, 0.0, 0.0};
  double chi_rel = 0.0;
};

/// Spin-1/2 particle in a cylindrical guide along z: Psi = chi * Phi with a
/// static transverse ground-mode profile exp(-rho^2/2w^2) times a spreading
/// 1D Gaussian along z (normalized units).
struct WaveguideSpinField {
  double w = 1.0;
  double sigma0 = 1.0;
  SpinVector spin;
};

struct WaveField;
using FieldPtr = std::shared_ptr<const WaveField>;

struct Superposition {
  std::vector<std::pair<complexd, FieldPtr>> terms;
};

struct WaveField {
  using Model =
      std::variant<PlaneWave, Superposition, GaussianPacket, DoubleSlit, WaveguideSpinField>;
  Model model;
  double mass = 1.0;

  int components() const {
    return std::holds_alternative<WaveguideSpinField>(model) ? 2 : 1;
  }

  /// Energy of stationary variants (plane waves / equal-energy superpositions).
  std::optional<double> energy() const;
};

inline WaveField make_plane_wave(Vec3 k, double mass = 1.0) {
  return WaveField{PlaneWave{k}, mass};
}

inline WaveField make_superposition(std::vector<std::pair<complexd, WaveField>> terms,
                                    double mass = 1.0) {
  Superposition s;
  for (auto& [c, f] : terms) {
    if (f.components() != 1)
      throw PreconditionError("superposition terms must be scalar fields");
    if (std::abs(f.mass - mass) > 0.0)
      throw PreconditionError("superposition terms must share the mass");
    s.terms.emplace_back(c, std::make_shared<WaveField>(std::move(f)));
  }
  return WaveField{std::move(s), mass};
}

inline std::optional<double> WaveField::energy() const {
  if (const auto* pw = std::get_if<PlaneWave>(&model))
    return norm2(pw->k) / (2.0 * mass);
  if (const auto* sp = std::get_if<Superposition>(&model)) {
    std::optional<double> e;
    for (const auto& [c, f] : sp->terms) {
      (void)c;
      const auto sub = f->energy();
      if (!sub) return std::nullopt;
      if (!e)
        e = sub;
      else if (std::abs(*e - *sub) > 1e-10)
        return std::nullopt;
    }
    return e;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Value, gradient and Laplacian of every spinor component at one point.
struct FieldValue {
  std::array<complexd, 2> psi{{0.0, 0.0}};
  std::array<CVec3, 2> grad{};
  std::array<complexd, 2> lap{{0.0, 0.0}};
  int components = 1;
};

namespace detail {

inline void eval_gaussian_packet(const GaussianPacket& g, double mass, Vec3 x, double t,
                                 FieldValue& out) {
  const Gauss1D ax{g.center.x, g.sigma0, g.momentum.x, mass};
  const Gauss1D ay{g.center.y, g.sigma0, g.momentum.y, mass};
  const Gauss1D az{g.center.z, g.sigma0, g.momentum.z, mass};
  const complexd v = ax.value(x.x, t) * ay.value(x.y, t) * az.value(x.z, t);
  const CVec3 dl = {ax.dlog(x.x, t), ay.dlog(x.y, t), az.dlog(x.z, t)};
  out.psi[0] = v;
  out.grad[0] = {v * dl[0], v * dl[1], v * dl[2]};
  out.lap[0] =
      v * (ax.d2_over_psi(x.x, t) + ay.d2_over_psi(x.y, t) + az.d2_over_psi(x.z, t));
  out.components = 1;
}

inline double double_slit_overlap(const DoubleSlit& d) {
  return std::exp(-d.separation * d.separation / (4.0 * d.sigma0 * d.sigma0));
}

inline double double_slit_norm(const DoubleSlit& d) {
  const double ov = double_slit_overlap(d);
  return 1.0 / std::sqrt(2.0 + 2.0 * std::cos(d.chi_rel) * ov);
}

}  // namespace detail

inline FieldValue field_value(const WaveField& f, Vec3 x, double t);

namespace detail {

inline void eval_model(const PlaneWave& pw, double mass, Vec3 x, double t, FieldValue& out) {
  const double e = norm2(pw.k) / (2.0 * mass);
  const complexd v = std::exp(complexd(0.0, dot(pw.k, x) - e * t));
  out.psi[0] = v;
  out.grad[0] = {complexd(0.0, pw.k.x) * v, complexd(0.0, pw.k.y) * v,
                 complexd(0.0, pw.k.z) * v};
  out.lap[0] = -norm2(pw.k) * v;
  out.components = 1;
}

inline void eval_model(const GaussianPacket& g, double mass, Vec3 x, double t,
                       FieldValue& out) {
  eval_gaussian_packet(g, mass, x, t, out);
}

inline void eval_model(const DoubleSlit& d, double mass, Vec3 x, double t, FieldValue& out) {
  GaussianPacket upper{{+d.separation / 2.0, 0.0, 0.0}, d.sigma0, d.momentum};
  GaussianPacket lower{{-d.separation / 2.0, 0.0, 0.0}, d.sigma0, d.momentum};
  FieldValue a, b;
  eval_gaussian_packet(upper, mass, x, t, a);
  eval_gaussian_packet(lower, mass, x, t, b);
  const complexd phase = std::polar(1.0, d.chi_rel);
  const double n = double_slit_norm(d);
  out.psi[0] = n * (a.psi[0] + phase * b.psi[0]);
  out.grad[0] = complexd(n) * a.grad[0] + n * phase * b.grad[0];
  out.lap[0] = n * (a.lap[0] + phase * b.lap[0]);
  out.components = 1;
}

inline void eval_model(const WaveguideSpinField& wg, double mass, Vec3 x, double t,
                       FieldValue& out) {
  const double rho2 = x.x * x.x + x.y * x.y;
  const double w2 = wg.w * wg.w;
  const double amp = std::exp(-rho2 / (2.0 * w2)) / std::sqrt(M_PI * w2);
  const Gauss1D gz{0.0, wg.sigma0, 0.0, mass};
  const complexd phi = amp * gz.value(x.z, t);
  const complexd dlz = gz.dlog(x.z, t);
  const CVec3 dlog = {complexd(-x.x / w2), complexd(-x.y / w2), dlz};
  const complexd lap_over =
      rho2 / (w2 * w2) - 2.0 / w2 + gz.d2_over_psi(x.z, t);
  const Spinor chi = Spinor::from_spin(wg.spin);
  out.components = 2;
  for (int i = 0; i < 2; ++i) {
    out.psi[i] = chi.c[i] * phi;
    out.grad[i] = {out.psi[i] * dlog[0], out.psi[i] * dlog[1], out.psi[i] * dlog[2]};
    out.lap[i] = out.psi[i] * lap_over;
  }
}

inline void eval_model(const Superposition& sp, double mass, Vec3 x, double t,
                       FieldValue& out) {
  (void)mass;
  out.components = 1;
  for (const auto& [c, f] : sp.terms) {
    const FieldValue sub = field_value(*f, x, t);
    out.psi[0] += c * sub.psi[0];
    out.grad[0] = out.grad[0] + c * sub.grad[0];
    out.lap[0] += c * sub.lap[0];
  }
}

}  // namespace detail

inline FieldValue field_value(const WaveField& f, Vec3 x, double t) {
  FieldValue out;
  std::visit([&](const auto& model) { detail::eval_model(model, f.mass, x, t, out); },
             f.model);
  return out;
}

inline double density(const FieldValue& v) {
  double rho = 0.0;
  for (int i = 0; i < v.components; ++i) rho += std::norm(v.psi[i]);
  return rho;
}

inline double density(const WaveField& f, Vec3 x, double t) {
  return density(field_value(f, x, t));
}

inline Vec3 grad_density(const FieldValue& v) {
  Vec3 g;
  for (int i = 0; i < v.components; ++i) {
    g.x += 2.0 * (std::conj(v.psi[i]) * v.grad[i][0]).real();
    g.y += 2.0 * (std::conj(v.psi[i]) * v.grad[i][1]).real();
    g.z += 2.0 * (std::conj(v.psi[i]) * v.grad[i][2]).real();
  }
  return g;
}

/// Convective probability current Im[psi^dag grad psi]/m.
inline Vec3 convective_current(const FieldValue& v, double mass) {
  Vec3 j;
  for (int i = 0; i < v.components; ++i) {
    j.x += (std::conj(v.psi[i]) * v.grad[i][0]).imag();
    j.y += (std::conj(v.psi[i]) * v.grad[i][1]).imag();
    j.z += (std::conj(v.psi[i]) * v.grad[i][2]).imag();
  }
  return j / mass;
}

struct PauliCurrentParts {
  Vec3 convective;
  Vec3 spin;
  Vec3 total() const { return convective + spin; }
};

/// Gordon decomposition of the Pauli current (zero external potential):
/// convective term |Phi|^2 grad S / m plus the spin-magnetic term
/// curl(s |Phi|^2) / 2m. The z-component of the spin term reduces to
/// (s . phi_hat) d_rho |Phi|^2 / 2m.
inline PauliCurrentParts pauli_current_parts(const WaveField& f, Vec3 x, double t) {
  const auto* wg = std::get_if<WaveguideSpinField>(&f.model);
  if (!wg) throw PreconditionError("pauli_current requires a spin-carrying field");
  const FieldValue v = field_value(f, x, t);
  PauliCurrentParts parts;
  parts.convective = convective_current(v, f.mass);
  parts.spin = cross(grad_density(v), wg->spin.s) / (2.0 * f.mass);
  return parts;
}

inline Vec3 pauli_current(const WaveField& f, Vec3 x, double t) {
  return pauli_current_parts(f, x, t).total();
}

/// Probability current of the field: Pauli current for spin-carrying fields,
/// convective current otherwise.
inline Vec3 current(const WaveField& f, Vec3 x, double t) {
  if (f.components() == 2) return pauli_current(f, x, t);
  return convective_current(field_value(f, x, t), f.mass);
}

/// Guidance velocity J/rho. Throws NodalPointError at (near-)nodes.
inline Vec3 velocity(const WaveField& f, Vec3 x, double t) {
  const FieldValue v = field_value(f, x, t);
  const double rho = density(v);
  if (rho <= kDensityFloor)
    throw NodalPointError("velocity requested at a nodal point (rho <= floor)");
  Vec3 j = convective_current(v, f.mass);
  if (v.components == 2) {
    const auto* wg = std::get_if<WaveguideSpinField>(&f.model);
    j += cross(grad_density(v), wg->spin.s) / (2.0 * f.mass);
  }
  return j / rho;
}

/// Quantum potential -lap|psi| / (2m|psi|), from analytic derivatives.
inline double quantum_potential(const WaveField& f, Vec3 x, double t) {
  const FieldValue v = field_value(f, x, t);
  const double rho = density(v);
  if (rho <= kDensityFloor)
    throw NodalPointError("quantum potential requested at a nodal point");
  double lap_rho = 0.0;
  for (int i = 0; i < v.components; ++i) {
    lap_rho += 2.0 * (std::conj(v.psi[i]) * v.lap[i]).real();
    for (int d = 0; d < 3; ++d) lap_rho += 2.0 * std::norm(v.grad[i][d]);
  }
  const double grad2 = norm2(grad_density(v));
  // -lap|psi|/(2m|psi|) with lap|psi| = lap(rho)/(2 sqrt rho) - |grad rho|^2/(4 rho^3/2)
  return -lap_rho / (4.0 * f.mass * rho) + grad2 / (8.0 * f.mass * rho * rho);
}

/// Quantum potential by central finite differences on |psi| (step h).
/// Independent of the analytic Laplacians; used as an oracle.
inline double quantum_potential_fd(const WaveField& f, Vec3 x, double t,
                                   double h = kFdStep) {
  const double a0 = std::sqrt(density(f, x, t));
  if (a0 * a0 <= kDensityFloor)
    throw NodalPointError("quantum potential requested at a nodal point");
  double lap = 0.0;
  for (int d = 0; d < 3; ++d) {
    Vec3 xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    lap += std::sqrt(density(f, xp, t)) - 2.0 * a0 + std::sqrt(density(f, xm, t));
  }
  lap /= h * h;
  return -lap / (2.0 * f.mass * a0);
}

/// Local phase gradient by finite differences, unwrapped across the step.
inline Vec3 grad_phase_fd(const WaveField& f, Vec3 x, double t, double h = kFdStep) {
  Vec3 g;
  for (int d = 0; d < 3; ++d) {
    Vec3 xp = x, xm = x;
    xp[d] += h;
    xm[d] -= h;
    const FieldValue vp = field_value(f, xp, t);
    const FieldValue vm = field_value(f, xm, t);
    // arg(psi+ conj(psi-)) is the phase difference wrapped to (-pi, pi].
    g[d] = std::arg(vp.psi[0] * std::conj(vm.psi[0])) / (2.0 * h);
  }
  return g;
}

/// All local dBB quantities at one point.
struct FieldSample {
  std::array<complexd, 2> psi{{0.0, 0.0}};
  std::array<CVec3, 2> grad_psi{};
  int components = 1;
  double rho = 0.0;
  Vec3 current;
  double phase = 0.0;              ///< principal value; NaN at nodes
  double quantum_potential = 0.0;  ///< NaN at nodes
};

inline FieldSample evaluate_field(const WaveField& f, Vec3 x, double t) {
  const FieldValue v = field_value(f, x, t);
  FieldSample s;
  s.psi = v.psi;
  s.grad_psi = v.grad;
  s.components = v.components;
  s.rho = density(v);
  s.current = convective_current(v, f.mass);
  if (v.components == 2) {
    const auto* wg = std::get_if<WaveguideSpinField>(&f.model);
    s.current += cross(grad_density(v), wg->spin.s) / (2.0 * f.mass);
  }
  if (s.rho > kDensityFloor) {
    // For spinor fields the components share the envelope phase.
    const complexd ref =
        (v.components == 2 && std::abs(v.psi[0]) < std::abs(v.psi[1])) ? v.psi[1]
                                                                       : v.psi[0];
    s.phase = std::arg(ref);
    s.quantum_potential = quantum_potential(f, x, t);
  } else {
    s.phase = std::numeric_limits<double>::quiet_NaN();
    s.quantum_potential = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Two-plane-wave backflow superposition
// ---------------------------------------------------------------------------

/// The superposition e^{ik1.x} + alpha e^{ik2.x} (common energy), with the
/// accessors used in the backflow analysis.
struct BackflowPair {
  Vec3 k1, k2;
  complexd alpha;
  double mass = 1.0;

  BackflowPair(Vec3 k1_, Vec3 k2_, complexd alpha_, double mass_ = 1.0)
      : k1(k1_), k2(k2_), alpha(alpha_), mass(mass_) {
    if (!(k1.z > 0.0) || !(k2.z > 0.0))
      throw PreconditionError("backflow pair requires k1z > 0 and k2z > 0");
    if (std::abs(norm(k1) - norm(k2)) > 1e-10)
      throw PreconditionError("backflow pair requires equal energies |k1| = |k2|");
  }

  static complexd alpha_min(Vec3 k1, Vec3 k2) {
    return {-0.5 * (1.0 + k1.z / k2.z), 0.0};
  }

  /// J_z(Phi = pi) = (k2z/m) f(|alpha|).
  double f(double abs_alpha) const {
    const double beta = k1.z / k2.z;
    return abs_alpha * abs_alpha - (1.0 + beta) * abs_alpha + beta;
  }

  WaveField field() const {
    return make_superposition(
        {{complexd(1.0), make_plane_wave(k1, mass)}, {alpha, make_plane_wave(k2, mass)}},
        mass);
  }

  /// Effective wavevector grad S(x0) = m J(x0)/rho(x0).
  Vec3 k_eff(Vec3 x0) const {
    const WaveField f = field();
    const double rho = density(f, x0, 0.0);
    if (rho <= kDensityFloor) throw NodalPointError("k_eff at a nodal point");
    return mass * current(f, x0, 0.0) / rho;
  }

  double quantum_potential_at(Vec3 x0) const {
    return dbb::quantum_potential(field(), x0, 0.0);
  }
};

inline WaveField backflow_pair(Vec3 k1, Vec3 k2, complexd alpha, double mass = 1.0) {
  return BackflowPair(k1, k2, alpha, mass).field();
}

// ---------------------------------------------------------------------------
// Sampling support
// ---------------------------------------------------------------------------

struct Box {
  Vec3 lo, hi;
  double volume() const {
    return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
  }
};

/// Default proposal box: +/- 6 widths around the packet support. Plane waves
/// and generic superpositions fall back to a unit box the caller should
/// override.
inline Box default_sampling_box(const WaveField& f, double t) {
  struct Visitor {
    double mass;
    double t;
    Box operator()(const PlaneWave&) const { return {{-1, -1, -1}, {1, 1, 1}}; }
    Box operator()(const Superposition&) const { return {{-1, -1, -1}, {1, 1, 1}}; }
    Box operator()(const GaussianPacket& g) const {
      const double s = 6.0 * Gauss1D{0.0, g.sigma0, 0.0, mass}.spread(t);
      const Vec3 c = g.center + (t / mass) * g.momentum;
      return {c - Vec3{s, s, s}, c + Vec3{s, s, s}};
    }
    Box operator()(const DoubleSlit& d) const {
      const double s = 6.0 * Gauss1D{0.0, d.sigma0, 0.0, mass}.spread(t);
      const Vec3 drift = (t / mass) * d.momentum;
      const double half = d.separation / 2.0;
      return {Vec3{-half - s, -s, -s} + drift, Vec3{half + s, s, s} + drift};
    }
    Box operator()(const WaveguideSpinField& wg) const {
      const double sz = 6.0 * Gauss1D{0.0, wg.sigma0, 0.0, mass}.spread(t);
      const double st = 6.0 * wg.w;
      return {{-st, -st, -sz}, {st, st, sz}};
    }
  };
  return std::visit(Visitor{f.mass, t}, f.model);
}

/// Rigorous upper bound on the density over all space (amplitude bounds).
inline double density_upper_bound(const WaveField& f, double t) {
  struct Visitor {
    double mass;
    double t;
    double operator()(const PlaneWave&) const { return 1.0; }
    double operator()(const Superposition& sp) const {
      double a = 0.0;
      for (const auto& [c, sub] : sp.terms)
        a += std::abs(c) * std::sqrt(density_upper_bound(*sub, t));
      return a * a;
    }
    double operator()(const GaussianPacket& g) const {
      const double sp = Gauss1D{0.0, g.sigma0, 0.0, mass}.spread(t);
      const double amp2 = std::pow(M_PI, -1.5) / (sp * sp * sp);
      return amp2;
    }
    double operator()(const DoubleSlit& d) const {
      const double sp = Gauss1D{0.0, d.sigma0, 0.0, mass}.spread(t);
      const double amp = std::pow(M_PI * sp * sp, -0.75);
      const double n = detail::double_slit_norm(d);
      const double a = 2.0 * n * amp;
      return a * a;
    }
    double operator()(const WaveguideSpinField& wg) const {
      const double sp = Gauss1D{0.0, wg.sigma0, 0.0, mass}.spread(t);
      const double a =
          std::pow(M_PI * wg.w * wg.w, -0.5) * std::pow(M_PI * sp * sp, -0.25);
      return a * a;
    }
  };
  return std::visit(Visitor{f.mass, t}, f.model);
}

}  // namespace dbb
