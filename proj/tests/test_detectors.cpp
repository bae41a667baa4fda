#include <catch2/catch_amalgamated.hpp>

#include "dbb/detectors.hpp"
#include "dbb/rng.hpp"

using namespace dbb;

TEST_CASE("empty slab is transparent") {
  const SlabDetector empty{0.0, {1.3, 0.7}, 2.0, 1.0};
  const ScatterResult s = slab_scatter(2.0, 0.3, empty);
  REQUIRE(std::abs(s.R) < 1e-14);
  REQUIRE(std::abs(std::abs(s.T) - 1.0) < 1e-14);
  REQUIRE(std::abs(s.absorption) < 1e-13);
}

TEST_CASE("lossless slab conserves flux") {
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const SlabDetector slab{rng.uniform(0.1, 3.0), {rng.uniform(0.1, 2.0), 0.0},
                            rng.uniform(0.2, 4.0), 1.0};
    const double k = rng.uniform(0.5, 5.0);
    const double theta = rng.uniform(0.0, 1.4);
    const ScatterResult s = slab_scatter(k, theta, slab);
    REQUIRE(std::norm(s.R) + std::norm(s.T) == Catch::Approx(1.0).margin(1e-10));
  }
  // attractive lossless well, away from the evanescent cutoff
  const ScatterResult s = slab_scatter(3.0, 0.3, SlabDetector{0.2, {-0.3, 0.0}, 1.5, 1.0});
  REQUIRE(std::norm(s.R) + std::norm(s.T) == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("weak coupling: absorbed flux is independent of the incidence angle") {
  const double k = 2.0;
  const SlabDetector weak{2e-4, {0.0, 0.25}, 0.5, 1.0};
  const double nsd = weak.N * weak.sigma_ext(k) * weak.d;
  REQUIRE(nsd <= 1e-3);
  std::vector<double> flux_abs;
  for (double theta = 0.0; theta <= 1.0; theta += 0.125) {
    const ScatterResult s = slab_scatter(k, theta, weak);
    REQUIRE(s.absorption == Catch::Approx(nsd / std::cos(theta)).epsilon(2e-3));
    flux_abs.push_back(std::cos(theta) * s.absorption);
  }
  const auto [lo, hi] = std::minmax_element(flux_abs.begin(), flux_abs.end());
  REQUIRE((*hi - *lo) / *hi < 1e-3);
}

TEST_CASE("strong absorption: transmission dies, absorption -> 1 - |r|^2") {
  const SlabDetector strong{5.0, {0.2, 3.0}, 4.0, 1.0};
  const ScatterResult s = slab_scatter(2.0, 0.2, strong);
  REQUIRE(std::norm(s.T) < 1e-8);
  const complexd r = (s.k1 - s.k2) / (s.k1 + s.k2);
  REQUIRE(s.absorption == Catch::Approx(1.0 - std::norm(r)).margin(1e-6));
}

TEST_CASE("slab absorption budget identity") {
  SECTION("zero density absorbs nothing") {
    const SlabBudget b = slab_absorption_budget(2.0, 0.4, SlabDetector{0.0, {0.5, 0.5}, 1.0, 1.0});
    REQUIRE(b.flux_in_minus_out == Catch::Approx(0.0).margin(1e-13));
    REQUIRE(b.volume_absorption == Catch::Approx(0.0).margin(1e-13));
  }

  SECTION("100 random lossy slabs agree to 1e-8 relative") {
    Rng rng(67);
    for (int i = 0; i < 100; ++i) {
      const SlabDetector slab{rng.uniform(0.05, 2.0),
                              {rng.uniform(-1.5, 1.5), rng.uniform(0.05, 2.0)},
                              rng.uniform(0.2, 3.0),
                              rng.uniform(0.5, 2.0)};
      const double k = rng.uniform(0.5, 4.0);
      const double theta = rng.uniform(0.0, 1.3);
      const SlabBudget b = slab_absorption_budget(k, theta, slab);
      REQUIRE(std::abs(b.flux_in_minus_out - b.volume_absorption) <=
              1e-8 * std::abs(b.volume_absorption));
    }
  }

  SECTION("grazing incidence kills the normal flux") {
    const SlabDetector slab{0.5, {0.3, 0.6}, 1.0, 1.0};
    const SlabBudget b = slab_absorption_budget(2.0, M_PI / 2.0 - 1e-5, slab);
    REQUIRE(std::abs(b.flux_in_minus_out) < 1e-4);
    REQUIRE(std::abs(b.volume_absorption) < 1e-4);
  }
}

TEST_CASE("slab trajectory slopes") {
  const double k = 2.5, theta = 0.4;
  const SlabDetector slab{0.4, {0.6, 0.9}, 1.1, 1.0};

  SECTION("transmitted region recovers the free slope") {
    REQUIRE(slab_trajectory_slopes(k, theta, slab, slab.d + 0.5) ==
            Catch::Approx(1.0 / std::tan(theta)).epsilon(1e-13));
  }

  SECTION("no reflection means the free slope in front as well") {
    const SlabDetector empty{0.0, {0.0, 0.0}, 1.0, 1.0};
    REQUIRE(slab_trajectory_slopes(k, theta, empty, -1.0) ==
            Catch::Approx(1.0 / std::tan(theta)).epsilon(1e-12));
  }

  SECTION("incident-region slope oscillates around the mean-trajectory value") {
    const ScatterResult s = slab_scatter(k, theta, slab);
    const double aR2 = std::norm(s.R);
    // <dx/dz> over one interference period gives the mean trajectory
    const double period = M_PI / s.k1;
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      acc += 1.0 / slab_trajectory_slopes(k, theta, slab, -5.0 + period * i / n);
    const double mean_dx_dz = acc / n;
    REQUIRE(1.0 / mean_dx_dz ==
            Catch::Approx(slab_mean_incident_slope(k, theta, slab)).epsilon(1e-3));
    REQUIRE(slab_mean_incident_slope(k, theta, slab) ==
            Catch::Approx((s.k1 / (k * std::sin(theta))) * (1 - aR2) / (1 + aR2))
                .epsilon(1e-13));
  }

  SECTION("angle domain is enforced") {
    REQUIRE_THROWS_AS(slab_scatter(2.0, -0.1, slab), PreconditionError);
    REQUIRE_THROWS_AS(slab_scatter(2.0, M_PI / 2.0, slab), PreconditionError);
    REQUIRE_THROWS_AS(slab_scatter(-1.0, 0.3, slab), PreconditionError);
  }
}

TEST_CASE("pml potential profile") {
  const PMLProfile fwd{1.0, 2.0, 25.0, PmlDirection::forward, {0, 0, 2 * M_PI}, 1.0};
  PMLProfile bwd = fwd;
  bwd.direction = PmlDirection::backward;

  SECTION("vanishes outside the padded support") {
    const double far = fwd.d + 3.0 / std::sqrt(fwd.a) + 1.0;
    REQUIRE(std::abs(pml_potential(fwd, far)) < 1e-10);
    REQUIRE(std::abs(pml_potential(fwd, -far + fwd.d)) < 1e-10);
  }

  SECTION("imaginary parts coincide; real parts differ by the chi' sign") {
    for (double z = -0.6; z <= fwd.d + 0.6; z += 0.037) {
      const complexd vf = pml_potential(fwd, z);
      const complexd vb = pml_potential(bwd, z);
      REQUIRE(vf.imag() == vb.imag());
      REQUIRE(vf.real() - vb.real() ==
              Catch::Approx(-pml_chi_prime(fwd, z) / fwd.mass).margin(1e-14));
    }
  }

  SECTION("imaginary part is absorbing for chi >= 0") {
    for (double z = -0.6; z <= fwd.d + 0.6; z += 0.05) REQUIRE(pml_potential(fwd, z).imag() <= 0.0);
  }
}

TEST_CASE("pml analytic solution satisfies the wave equation") {
  PMLProfile p{1.0, 2.0, 25.0, PmlDirection::forward, {0, 0, 2 * M_PI}, 1.0};
  REQUIRE(verify_pml_solution(p, 2 * M_PI) < 1e-6);
  p.chi0 = 0.0;
  REQUIRE(verify_pml_solution(p, 2 * M_PI) < 1e-10);
}

TEST_CASE("pml detection probabilities") {
  const double k = 2.0 * M_PI;

  SECTION("F(0) = G(0) = 1 and the closed forms hold") {
    REQUIRE(pml_profile_F(0.0) == Catch::Approx(1.0).margin(1e-10));
    REQUIRE(pml_profile_G(0.0) == Catch::Approx(1.0).margin(1e-10));
    for (double xi : {0.05, 0.2, 0.7, 1.5}) {
      REQUIRE(pml_profile_F(xi) == Catch::Approx((1.0 - std::exp(-xi)) / xi).epsilon(1e-9));
      REQUIRE(pml_profile_G(xi) ==
              Catch::Approx(std::exp(-xi) * (1.0 - std::exp(-xi)) / xi).epsilon(1e-9));
    }
  }

  SECTION("step closed form equals the direct quadrature") {
    for (double chi0 : {0.2, 0.5, 1.0}) {
      for (double d : {0.5, 1.0, 2.0}) {
        const double closed = pml_detection_probability_step(chi0, d, k);
        const double quad = pml_detection_probability_step_quadrature(chi0, d, k);
        REQUIRE(std::abs(closed - quad) <= 1e-12 * closed);
      }
    }
  }

  SECTION("half efficiency at chi0 d = ln(2)/2") {
    const double p = pml_detection_probability_step(0.5 * std::log(2.0), 1.0, k);
    REQUIRE(p == Catch::Approx(0.5 * k).epsilon(1e-14));
  }

  SECTION("unit efficiency in the opaque limit") {
    const double p = pml_detection_probability_step(8.0, 2.0, k);
    REQUIRE(p == Catch::Approx(k).epsilon(1e-10));
  }

  SECTION("smooth formula matches its own quadrature and the exact total") {
    for (double a : {25.0, 100.0, 400.0}) {
      const PMLProfile prof{0.8, 1.5, a, PmlDirection::forward, {0, 0, k}, 1.0};
      const double smooth = pml_detection_probability(prof, k);
      const double quad = pml_detection_probability_quadrature(prof, k);
      const double exact = k * (1.0 - std::exp(-2.0 * (prof.xi() + prof.chi0 * prof.d)));
      REQUIRE(smooth == Catch::Approx(quad).epsilon(1e-9));
      REQUIRE(smooth == Catch::Approx(exact).epsilon(1e-9));
    }
  }

  SECTION("smooth -> step as xi -> 0") {
    // the shoulders absorb an extra O(xi), so drive xi to 1e-9
    const double chi0 = 0.6, d = 1.2, xi_target = 1e-9;
    const double a = M_PI * chi0 * chi0 / (xi_target * xi_target);
    const double step = pml_detection_probability_step(chi0, d, k);
    const PMLProfile tight{chi0, d, a, PmlDirection::forward, {0, 0, k}, 1.0};
    REQUIRE(tight.xi() == Catch::Approx(xi_target).epsilon(1e-12));
    REQUIRE(std::abs(pml_detection_probability(tight, k) - step) < 1e-8 * step + 1e-8);
  }

  SECTION("strictly increasing in chi0 d") {
    double prev = -1.0;
    for (double cd = 0.1; cd <= 3.0; cd += 0.1) {
      const double p = pml_detection_probability_step(cd, 1.0, k);
      REQUIRE(p > prev);
      prev = p;
    }
  }
}

TEST_CASE("numeric scattering off the pml potential") {
  const double k = 2.0 * M_PI;
  const PMLProfile p{1.0, 2.0, 25.0, PmlDirection::forward, {0, 0, k}, 1.0};
  REQUIRE(p.a >= 25.0 / (p.d * p.d));
  const double pad = 5.0 / std::sqrt(p.a) + 1.0;
  const auto v = [&](double z) { return pml_potential(p, z); };

  SECTION("design wave sees no reflection") {
    const ScatterAmplitudes amps = scatter_numeric_1d(v, k, -pad, p.d + pad);
    REQUIRE(std::abs(amps.R) < 1e-4);
    REQUIRE(std::abs(amps.T) ==
            Catch::Approx(std::exp(-(p.xi() + p.chi0 * p.d))).epsilon(1e-4));
  }

  SECTION("detuned wave is partially reflected") {
    const ScatterAmplitudes amps = scatter_numeric_1d(v, 1.3 * k, -pad, p.d + pad);
    REQUIRE(std::abs(amps.R) > 1e-3);
  }

  SECTION("forward medium does not absorb the backward wave cleanly") {
    REQUIRE(p.chi0 * p.d >= 1.0);
    const ScatterAmplitudes amps = scatter_numeric_1d(v, k, -pad, p.d + pad, 1.0, false);
    REQUIRE(std::abs(amps.R) > 0.01);
  }
}

TEST_CASE("spacetime absorbers") {
  SECTION("a real potential absorbs nothing") {
    const ScalarAbsorber sc{{{-1, -1, -1}, {1, 1, 1}, 0.0, 1.0},
                            [](Vec3, double) { return complexd(0.7, 0.0); }};
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 0}}, 1.0};
    REQUIRE(spacetime_absorption(SpacetimeDetector{sc}, f).probability ==
            Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("positive imaginary part is rejected") {
    const ScalarAbsorber sc{{{-1, -1, -1}, {1, 1, 1}, 0.0, 1.0},
                            [](Vec3, double) { return complexd(0.0, 0.4); }};
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 0}}, 1.0};
    REQUIRE_THROWS_AS(spacetime_absorption(SpacetimeDetector{sc}, f), PreconditionError);
  }

  SECTION("additive over disjoint boxes") {
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 1.0}}, 1.0};
    const double gamma = 0.8;
    auto v = [gamma](Vec3, double) { return complexd(0.0, -gamma / 2.0); };
    const SpacetimeBox box_a{{-1, -1, -1}, {1, 1, 0.2}, 0.0, 0.6};
    const SpacetimeBox box_b{{-1, -1, 0.2}, {1, 1, 1.5}, 0.0, 0.6};
    SpacetimeBox box_ab = box_a;
    box_ab.hi = box_b.hi;
    const double pa =
        spacetime_absorption(SpacetimeDetector{ScalarAbsorber{box_a, v}}, f, 1e-9).probability;
    const double pb =
        spacetime_absorption(SpacetimeDetector{ScalarAbsorber{box_b, v}}, f, 1e-9).probability;
    const double pab =
        spacetime_absorption(SpacetimeDetector{ScalarAbsorber{box_ab, v}}, f, 1e-9).probability;
    REQUIRE(pab == Catch::Approx(pa + pb).epsilon(1e-7));
  }

  SECTION("thin efficient slab recovers the incident flux") {
    const double k = 2.0 * M_PI;
    const PMLProfile prof{1.0, 2.0, 100.0, PmlDirection::forward, {0, 0, k}, 1.0};
    const PmlAbsorbedWave wave{prof, k, 1.0};
    const double dt = 0.37, area = 1.0;
    const double pad = 6.0 / std::sqrt(prof.a);
    const ScalarAbsorber sc{{{-0.5, -0.5, -pad}, {0.5, 0.5, prof.d + pad}, 0.0, dt},
                            [prof, k](Vec3 x, double) {
                              return complexd(0.0, -pml_chi(prof, x.z) * k / prof.mass);
                            }};
    const double p = spacetime_absorption(SpacetimeDetector{sc}, wave, 1e-7).probability;
    const double flux = dt * area * k;  // dt * int_Sigma J.n of the incident wave
    REQUIRE(p == Catch::Approx(flux).epsilon(0.05));
  }

  SECTION("weak vector coupling reads the full current including the spin term") {
    const WaveField f{WaveguideSpinField{1.0, 1.0, SpinVector{{1, 0, 0}}}, 1.0};
    const Vec3 x0{0.0, 0.6, 0.4};  // phi = pi/2: spin term contributes to J_z
    const double t0 = 0.5;
    const double eps = 1e-3, half = 0.04, dt = 0.05;
    VectorAbsorber va;
    va.box = {x0 - Vec3{half, half, half}, x0 + Vec3{half, half, half}, t0, t0 + dt};
    va.im_a = {0.0, 0.0, eps / 2.0};
    va.charge = 1.0;
    const double p = spacetime_absorption(SpacetimeDetector{va}, f, 1e-9).probability;
    const double dv = va.box.volume3();
    const Vec3 j = pauli_current(f, x0, t0 + dt / 2.0);
    const Vec3 j_conv = pauli_current_parts(f, x0, t0 + dt / 2.0).convective;
    // midpoint value vs box average: agreement limited by the box curvature
    REQUIRE(p == Catch::Approx(eps * dt * dv * j.z).epsilon(1e-2));
    // the spin term is actually being read: the convective current alone is off
    REQUIRE(std::abs(p - eps * dt * dv * j_conv.z) > 10.0 * std::abs(p - eps * dt * dv * j.z));
  }

  SECTION("vector coupling against the flow is flagged as gain") {
    const WaveField f = make_plane_wave({0, 0, 2.0});
    VectorAbsorber va;
    va.box = {{-0.1, -0.1, -0.1}, {0.1, 0.1, 0.1}, 0.0, 0.1};
    va.im_a = {0.0, 0.0, -0.5};
    const AbsorptionResult r = spacetime_absorption(SpacetimeDetector{va}, f, 1e-9);
    REQUIRE(r.probability < 0.0);
    REQUIRE(r.gain);
  }
}

TEST_CASE("huygens scattered field of a detector face") {
  const double k = 2.0 * M_PI;
  const WaveField pw = make_plane_wave({0, 0, k});

  SECTION("deep shadow behind a large input face") {
    const AperturePatch ap{{0, 0, 0}, 8.0, 8.0};
    const Vec3 x{0, 0, 1.5};
    const complexd scat = scattered_field(ap, pw, x, false);
    const complexd inc = field_value(pw, x, 0.0).psi[0];
    REQUIRE(std::abs(inc + scat) / std::abs(inc) < 0.2);
  }

  SECTION("vanishing aperture scatters nothing") {
    const AperturePatch tiny{{0, 0, 0}, 1e-5, 1e-5};
    REQUIRE(std::abs(scattered_field(tiny, pw, {0, 0, 1.0}, false)) < 1e-8);
  }

  SECTION("backflow flag flips the sign exactly") {
    const AperturePatch ap{{0, 0, 0}, 2.0, 2.0};
    const complexd a = scattered_field(ap, pw, {0.3, -0.2, 1.0}, false);
    const complexd b = scattered_field(ap, pw, {0.3, -0.2, 1.0}, true);
    REQUIRE(std::abs(a + b) == 0.0);
  }

  SECTION("observation in the aperture plane is rejected") {
    const AperturePatch ap{{0, 0, 0}, 2.0, 2.0};
    REQUIRE_THROWS_AS(scattered_field(ap, pw, {5.0, 0.0, 0.0}, false), PreconditionError);
  }

  SECTION("non-stationary fields are rejected") {
    const WaveField packet{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 1}}, 1.0};
    const AperturePatch ap{{0, 0, 0}, 2.0, 2.0};
    REQUIRE_THROWS_AS(scattered_field(ap, packet, {0, 0, 1.0}, false), PreconditionError);
  }
}
