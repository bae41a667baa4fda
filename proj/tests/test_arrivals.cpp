#include <catch2/catch_amalgamated.hpp>

#include "dbb/arrivals.hpp"
#include "dbb/povm.hpp"
#include "dbb/rng.hpp"

using namespace dbb;

TEST_CASE("ideal flux of a plane wave through a unit-area patch") {
  const double k = 1.9;
  const WaveField f = make_plane_wave({0.0, 0.0, k});
  Surface unit_patch{PlaneZ{2.0}};
  std::get<PlaneZ>(unit_patch.shape).half_width = 0.5;  // area 1
  const auto flux = ideal_flux_distribution(f, unit_patch, {0.0, 0.7, 3.1});
  for (double v : flux) REQUIRE(v == Catch::Approx(k).epsilon(1e-9));
}

TEST_CASE("flux equals the rate of change of the cumulative mass") {
  // unidirectional drift: |d/dt int_{z<L} rho| is an independent oracle
  const double vz = 2.0, L = 5.0, sigma0 = 1.0;
  const WaveField f{GaussianPacket{{0, 0, 0}, sigma0, {0, 0, vz}}, 1.0};
  const Surface plane{PlaneZ{L}};
  const Gauss1D g{0.0, sigma0, vz, 1.0};
  auto mass_below = [&](double t) {
    const double mu = vz * t;
    const double sd = g.spread(t) / std::sqrt(2.0);
    return 0.5 * (1.0 + std::erf((L - mu) / (sd * std::sqrt(2.0))));
  };
  for (double t : {1.2, 2.0, 2.5, 3.0}) {
    const double h = 1e-4;
    const double rate = std::abs(mass_below(t + h) - mass_below(t - h)) / (2.0 * h);
    const double flux = surface_flux_abs(f, plane, t, 1e-9);
    REQUIRE(flux == Catch::Approx(rate).epsilon(1e-5));
  }
}

TEST_CASE("transverse spin changes the arrival-time flux") {
  const WaveField sz{WaveguideSpinField{1.0, 1.0, SpinVector{{0, 0, 1}}}, 1.0};
  const WaveField sx{WaveguideSpinField{1.0, 1.0, SpinVector{{1, 0, 0}}}, 1.0};
  const Surface disk{Disk{2.0, 10.0}};
  bool differ = false;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double a = surface_flux_abs(sz, disk, t, 1e-8);
    const double b = surface_flux_abs(sx, disk, t, 1e-8);
    if (std::abs(a - b) > 1e-3 * std::max(a, b)) differ = true;
  }
  REQUIRE(differ);
}

TEST_CASE("analytic arrival curve of the guided convective current") {
  DDParams p;
  p.L = 2.0;
  p.lambda0 = 1.0;
  for (int i = 0; i <= 1200; ++i) p.tau_grid.push_back(0.05 * i);
  const auto vals = dd_analytic(p);

  SECTION("zero at tau = 0, nonnegative, vanishing tail") {
    REQUIRE(vals.front() == 0.0);
    for (double v : vals) REQUIRE(v >= 0.0);
    REQUIRE(vals.back() < 1e-3 * *std::max_element(vals.begin(), vals.end()));
  }

  SECTION("single interior maximum") {
    std::size_t peak = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
      if (vals[i] > vals[peak]) peak = i;
    REQUIRE(peak > 0);
    REQUIRE(peak < vals.size() - 1);
    for (std::size_t i = 1; i <= peak; ++i) REQUIRE(vals[i] >= vals[i - 1]);
    for (std::size_t i = peak + 1; i < vals.size(); ++i) REQUIRE(vals[i] <= vals[i - 1]);
  }

  SECTION("scales as 1/lambda0") {
    DDParams q = p;
    q.lambda0 = 2.5;
    const auto scaled = dd_analytic(q);
    for (std::size_t i = 0; i < vals.size(); ++i)
      REQUIRE(scaled[i] == Catch::Approx(vals[i] / 2.5).margin(1e-14));
  }

  SECTION("integrable: quadrature of the closed form converges") {
    const double total = integrate_gk(
        [&](double tau) {
          DDParams one = p;
          one.tau_grid = {std::max(tau, 1e-12)};
          return dd_analytic(one)[0];
        },
        0.0, std::numeric_limits<double>::infinity(), 1e-10);
    REQUIRE(std::isfinite(total));
    REQUIRE(total > 0.0);
  }

  SECTION("input validation") {
    DDParams bad = p;
    bad.L = -1.0;
    REQUIRE_THROWS_AS(dd_analytic(bad), PreconditionError);
    DDParams unsorted;
    unsorted.tau_grid = {0.0, 0.2, 0.1};
    REQUIRE_THROWS_AS(dd_analytic(unsorted), PreconditionError);
  }
}

TEST_CASE("full-signal distribution is spin independent") {
  const Surface disk{Disk{2.0, 10.0}};
  std::vector<double> times{0.4, 0.9, 1.7, 3.0};
  const double eta = 0.05;

  const WaveField sz{WaveguideSpinField{1.0, 1.0, SpinVector{{0, 0, 1}}}, 1.0};
  const WaveField sx{WaveguideSpinField{1.0, 1.0, SpinVector{{1, 0, 0}}}, 1.0};
  const FullSignal fz = full_signal_distribution(sz, disk, eta, times);
  const FullSignal fx = full_signal_distribution(sx, disk, eta, times);

  SECTION("longitudinal spin term is identically zero") {
    for (double r : fz.spin_residuals) REQUIRE(r == 0.0);
  }

  SECTION("transverse spin term integrates to zero over the full loop") {
    for (std::size_t i = 0; i < times.size(); ++i)
      REQUIRE(std::abs(fx.spin_residuals[i]) < 1e-9 * std::abs(fx.values[i]));
  }

  SECTION("transverse equals longitudinal") {
    for (std::size_t i = 0; i < times.size(); ++i)
      REQUIRE(fx.values[i] == Catch::Approx(fz.values[i]).epsilon(1e-8));
  }

  SECTION("the basis-sum identity holds for full signals") {
    std::map<std::string, std::vector<double>> dists;
    const Vec3 dirs[4] = {{0, 0, 1}, {0, 0, -1}, {1, 0, 0}, {-1, 0, 0}};
    const char* labels[4] = {"+z", "-z", "+x", "-x"};
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) {
      const WaveField f{WaveguideSpinField{1.0, 1.0, SpinVector{dirs[i]}}, 1.0};
      dists[labels[i]] = full_signal_distribution(f, disk, eta, times).values;
      for (double v : dists[labels[i]]) scale = std::max(scale, std::abs(v));
    }
    const GtzReport rep = gtz_sum_test(dists, times);
    REQUIRE(rep.max_deviation < 1e-8 * std::max(1.0, scale));
  }
}

TEST_CASE("which-path retrodiction") {
  const DoubleSlit slit{8.0, 1.0, {0.0, 0.0, 2.0}, 0.0};

  SECTION("symmetric superposition gives exactly one half") {
    const WaveField f{slit, 1.0};
    for (double t : {0.0, 0.8, 2.0}) {
      const WhichPathResult r = which_path(f, t);
      REQUIRE(r.p_plus == Catch::Approx(0.5).margin(1e-6));
      REQUIRE(r.p_plus + r.p_minus == Catch::Approx(1.0).margin(1e-8));
      REQUIRE(r.retrodictive);
    }
  }

  SECTION("single packet: all the mass on its own side") {
    const WhichPathResult r = which_path_amplitudes(slit, 1.0, 0.0, 1.0, 0.0);
    REQUIRE(r.p_plus == Catch::Approx(1.0).margin(1e-6));
    REQUIRE_FALSE(r.retrodictive);
    const WhichPathResult l = which_path_amplitudes(slit, 1.0, 0.0, 0.0, 1.0);
    REQUIRE(l.p_minus == Catch::Approx(1.0).margin(1e-6));
  }

  SECTION("chi = pi stays retrodictive, generic phases do not") {
    DoubleSlit anti = slit;
    anti.chi_rel = M_PI;
    REQUIRE(which_path(WaveField{anti, 1.0}, 0.5).retrodictive);
    DoubleSlit generic = slit;
    generic.chi_rel = 0.7;
    REQUIRE_FALSE(which_path(WaveField{generic, 1.0}, 0.5).retrodictive);
  }

  SECTION("invariant under a global phase") {
    const complexd g = std::polar(1.0, 1.3);
    const WhichPathResult a = which_path_amplitudes(slit, 1.0, 0.9, 1.0, 1.0);
    const WhichPathResult b = which_path_amplitudes(slit, 1.0, 0.9, g, g);
    REQUIRE(a.p_plus == Catch::Approx(b.p_plus).epsilon(1e-12));
    REQUIRE(a.p_minus == Catch::Approx(b.p_minus).epsilon(1e-12));
  }

  SECTION("overlapping packets are rejected") {
    const DoubleSlit tight{1.0, 1.0, {0.0, 0.0, 2.0}, 0.0};
    REQUIRE_THROWS_AS(which_path(WaveField{tight, 1.0}, 0.0), OverlapError);
  }
}

TEST_CASE("monte carlo arrival histograms") {
  SECTION("field moving away from the surface never arrives") {
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, -2.0}}, 1.0};
    McArrivalOptions opt;
    opt.n = 200;
    opt.seed = 3;
    opt.t_max = 3.0;
    opt.tol = 1e-7;
    opt.bins = 20;
    const ArrivalHistogram h = mc_first_arrival(f, Surface{PlaneZ{6.0}}, opt);
    REQUIRE(h.n_noarrival == opt.n);
    REQUIRE(h.first_mass() == 0.0);
  }

  SECTION("accounting identity and first-vs-all ordering") {
    const WaveField f{WaveguideSpinField{1.0, 1.0, SpinVector{{1, 0, 0}}}, 1.0};
    McArrivalOptions opt;
    opt.n = 1500;
    opt.seed = 13;
    opt.t_max = 16.0;
    opt.tol = 1e-6;
    opt.bins = 40;
    const ArrivalHistogram h = mc_first_arrival(f, Surface{Disk{3.0, 12.0}}, opt);
    std::uint64_t firsts = 0, alls = 0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
      REQUIRE(h.first[i] <= h.all[i]);
      REQUIRE(h.all_positive[i] + h.all_negative[i] == h.all[i]);
      firsts += h.first[i];
      alls += h.all[i];
    }
    REQUIRE(firsts + h.n_noarrival + h.n_lost == h.n_total);
    REQUIRE(h.first_mass() <= 1.0);
    // spin-driven zigzagging makes repeat crossings
    REQUIRE(alls > firsts);
    // post-selection inclusion: the late-time tail loses first-arrival mass
    std::uint64_t late_first = 0, late_all = 0;
    for (std::size_t i = h.bins() / 2; i < h.bins(); ++i) {
      late_first += h.first[i];
      late_all += h.all[i];
    }
    REQUIRE(late_first < late_all);
  }

  SECTION("deterministic given the seed and worker count independent") {
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 2.0}}, 1.0};
    McArrivalOptions opt;
    opt.n = 400;
    opt.seed = 21;
    opt.t_max = 5.0;
    opt.tol = 1e-7;
    opt.bins = 25;
    opt.threads = 1;
    const ArrivalHistogram a = mc_first_arrival(f, Surface{PlaneZ{6.0}}, opt);
    opt.threads = 3;
    const ArrivalHistogram b = mc_first_arrival(f, Surface{PlaneZ{6.0}}, opt);
    REQUIRE(a.first == b.first);
    REQUIRE(a.all == b.all);
    REQUIRE(a.n_noarrival == b.n_noarrival);
  }

  SECTION("free packet histogram matches the ideal flux curve") {
    const WaveField f{GaussianPacket{{0, 0, 0}, 1.0, {0, 0, 3.0}}, 1.0};
    const Surface plane{PlaneZ{8.0}};
    McArrivalOptions opt;
    opt.n = 20000;
    opt.seed = 7;
    opt.t_max = 6.0;
    opt.tol = 1e-7;
    opt.bins = 60;
    const ArrivalHistogram h = mc_first_arrival(f, plane, opt);

    std::vector<double> obs, expd;
    double covered = 0.0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
      const double a = h.bin_edges[i], b = h.bin_edges[i + 1];
      const double fa = surface_flux_abs(f, plane, a, 1e-8);
      const double fm = surface_flux_abs(f, plane, 0.5 * (a + b), 1e-8);
      const double fb = surface_flux_abs(f, plane, b, 1e-8);
      const double e = opt.n * (b - a) / 6.0 * (fa + 4.0 * fm + fb);
      obs.push_back(static_cast<double>(h.first[i]));
      expd.push_back(e);
      covered += e;
    }
    obs.push_back(static_cast<double>(h.n_noarrival + h.n_lost));
    expd.push_back(opt.n - covered);
    const ChiSquareResult r = chi_square_test(obs, expd);
    REQUIRE(r.p_value > 0.01);
  }
}
