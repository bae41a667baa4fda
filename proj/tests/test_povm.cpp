#include <catch2/catch_amalgamated.hpp>

#include "dbb/povm.hpp"
#include "dbb/rng.hpp"

using namespace dbb;

TEST_CASE("trivial pointer model: identity coupling never moves the pointer") {
  PointerModel m;
  m.dS = 2;
  m.dM = 2;
  m.U = MatrixXc::Identity(4, 4);
  m.phi0 = VectorXc::Zero(2);
  m.phi0(0) = 1.0;
  m.partition = {{0}, {1}};
  const OperatorFamily fam = construct_pointer_povm(m);
  REQUIRE((fam.members[0] - MatrixXc::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(fam.members[1].cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(check_povm(fam).passes());
}

TEST_CASE("cnot coupling realizes the projective measurement") {
  PointerModel m;
  m.dS = 2;
  m.dM = 2;
  m.U = MatrixXc::Zero(4, 4);
  // pointer flips iff the system is in |1>; joint index q*dM + xi
  m.U(0, 0) = 1.0;
  m.U(1, 1) = 1.0;
  m.U(3, 2) = 1.0;
  m.U(2, 3) = 1.0;
  m.phi0 = VectorXc::Zero(2);
  m.phi0(0) = 1.0;
  m.partition = {{0}, {1}};
  const OperatorFamily fam = construct_pointer_povm(m);
  MatrixXc p0 = MatrixXc::Zero(2, 2), p1 = MatrixXc::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  REQUIRE((fam.members[0] - p0).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE((fam.members[1] - p1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("random 4x4 joint unitary agrees with direct evolution") {
  const PointerModel m = random_pointer_model(2, 2, 2, 314159);
  const OperatorFamily fam = construct_pointer_povm(m);
  Rng rng = stream_rng(42, 0);
  for (int s = 0; s < 100; ++s) {
    const VectorXc psi = random_state(2, rng);
    const auto direct = pointer_probabilities_direct(m, psi);
    double total = 0.0;
    for (std::size_t n = 0; n < fam.members.size(); ++n) {
      const double via = (psi.adjoint() * fam.members[n] * psi)(0, 0).real();
      REQUIRE(std::abs(via - direct[n]) < 1e-10);
      total += via;
    }
    REQUIRE(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("povm axiom certification") {
  SECTION("projector family passes") {
    OperatorFamily fam;
    fam.dim = 2;
    MatrixXc p0 = MatrixXc::Zero(2, 2), p1 = MatrixXc::Zero(2, 2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    fam.members = {p0, p1};
    REQUIRE(check_povm(fam).passes());
  }

  SECTION("a scaled member breaks completeness") {
    OperatorFamily fam;
    fam.dim = 2;
    MatrixXc p0 = MatrixXc::Zero(2, 2), p1 = MatrixXc::Zero(2, 2);
    p0(0, 0) = 1.5;
    p1(1, 1) = 1.0;
    fam.members = {p0, p1};
    const PovmCheckReport rep = check_povm(fam);
    REQUIRE_FALSE(rep.passes());
    REQUIRE(rep.max_completeness_violation == Catch::Approx(0.5).margin(1e-14));
  }

  SECTION("negative member is caught by the eigenvalue check") {
    OperatorFamily fam;
    fam.dim = 2;
    MatrixXc a = MatrixXc::Identity(2, 2) * 1.5;
    MatrixXc b = MatrixXc::Identity(2, 2) * -0.5;
    fam.members = {a, b};
    const PovmCheckReport rep = check_povm(fam);
    REQUIRE_FALSE(rep.passes());
    REQUIRE(rep.min_eigenvalue < -0.4);
  }

  SECTION("every constructed pointer family passes (dims <= 8)") {
    Rng dims(7);
    for (int trial = 0; trial < 30; ++trial) {
      const int dS = 2 + static_cast<int>(dims.raw() % 7);
      const int dM = 2 + static_cast<int>(dims.raw() % 7);
      const int n_out = 2 + static_cast<int>(dims.raw() % static_cast<std::uint64_t>(dM - 1));
      const PointerModel m = random_pointer_model(dS, dM, std::min(n_out, dM), 5000 + trial);
      REQUIRE(check_povm(construct_pointer_povm(m)).passes());
    }
  }

  SECTION("invalid partitions are rejected") {
    PointerModel m;
    m.dS = 2;
    m.dM = 3;
    m.U = MatrixXc::Identity(6, 6);
    m.phi0 = VectorXc::Zero(3);
    m.phi0(0) = 1.0;
    m.partition = {{0}, {1}};  // missing index 2
    REQUIRE_THROWS_AS(construct_pointer_povm(m), PreconditionError);
    m.partition = {{0, 1}, {1, 2}};  // double cover
    REQUIRE_THROWS_AS(construct_pointer_povm(m), PreconditionError);
  }
}

TEST_CASE("projected-current additivity and its absolute-value failure") {
  const double k = 2.0 * M_PI;
  const Vec3 k1{k * std::sin(M_PI / 3), 0.0, k * std::cos(M_PI / 3)};
  const Vec3 k2{k * std::sin(9 * M_PI / 20), 0.0, k * std::cos(9 * M_PI / 20)};
  const complexd amin = BackflowPair::alpha_min(k1, k2);

  SECTION("degenerate pair: both defects vanish") {
    const WaveField f1 = make_plane_wave({0.2, 0.0, 1.0});
    const CurrentAdditivityReport rep =
        current_povm_counterexample(f1, f1, {0.1, 0.0, 0.3}, 0.0);
    REQUIRE(rep.signed_defect < 1e-14);
    REQUIRE(rep.absolute_defect < 1e-14);
  }

  SECTION("backflow superposition: signed additivity survives, absolute fails") {
    // Psi_- = (Psi_1 - Psi_2)/sqrt2 is proportional to the alpha_min pair
    const WaveField f1 = make_plane_wave(k1);
    const WaveField f2 =
        make_superposition({{-amin, make_plane_wave(k2)}});
    const CurrentAdditivityReport rep =
        current_povm_counterexample(f1, f2, {0, 0, 0}, 0.0);
    REQUIRE(rep.signed_defect < 1e-12);
    REQUIRE(rep.j_minus < 0.0);
    REQUIRE(rep.absolute_defect ==
            Catch::Approx(2.0 * std::abs(rep.j_minus)).epsilon(1e-12));
    REQUIRE(rep.absolute_defect > 0.1);
  }

  SECTION("forward-flowing superpositions show no absolute defect") {
    const double kz = 1.3, kx = 0.9;
    const WaveField f1 = make_plane_wave({kx, 0.0, kz});
    const WaveField f2 = make_plane_wave({-kx, 0.0, kz});
    const Vec3 x{0.37, 0.0, 0.11};  // generic point, both superpositions forward
    const CurrentAdditivityReport rep = current_povm_counterexample(f1, f2, x, 0.0);
    REQUIRE(rep.j_plus > 0.0);
    REQUIRE(rep.j_minus > 0.0);
    REQUIRE(rep.signed_defect < 1e-14);
    REQUIRE(rep.absolute_defect < 1e-14);
  }

  SECTION("preconditions on the incident currents") {
    const WaveField fwd = make_plane_wave({0, 0, 1.0});
    const WaveField bwd = make_plane_wave({0, 0, -1.0});
    REQUIRE_THROWS_AS(current_povm_counterexample(fwd, bwd, {0, 0, 0}, 0.0),
                      PreconditionError);
  }
}

TEST_CASE("basis-sum identity bookkeeping") {
  std::vector<double> grid{0.0, 0.5, 1.0, 1.5};

  SECTION("identical arrays give zero deviation") {
    std::map<std::string, std::vector<double>> d;
    const std::vector<double> v{0.1, 0.4, 0.3, 0.05};
    d["+z"] = d["-z"] = d["+x"] = d["-x"] = v;
    REQUIRE(gtz_sum_test(d, grid).max_deviation == 0.0);
  }

  SECTION("symmetric under swapping the two bases") {
    std::map<std::string, std::vector<double>> d;
    d["+z"] = {0.1, 0.4, 0.3, 0.05};
    d["-z"] = {0.1, 0.35, 0.3, 0.05};
    d["+x"] = {0.12, 0.3, 0.28, 0.0};
    d["-x"] = {0.09, 0.3, 0.28, 0.0};
    const GtzReport a = gtz_sum_test(d, grid);
    std::map<std::string, std::vector<double>> swapped;
    swapped["+z"] = d["+x"];
    swapped["-z"] = d["-x"];
    swapped["+x"] = d["+z"];
    swapped["-x"] = d["-z"];
    const GtzReport b = gtz_sum_test(swapped, grid);
    REQUIRE(a.max_deviation == Catch::Approx(b.max_deviation).margin(1e-15));
    REQUIRE(a.tau_at_max == b.tau_at_max);
  }

  SECTION("grid mismatch is rejected") {
    std::map<std::string, std::vector<double>> d;
    d["+z"] = d["-z"] = d["+x"] = {0.1, 0.2, 0.3, 0.4};
    d["-x"] = {0.1, 0.2};
    REQUIRE_THROWS_AS(gtz_sum_test(d, grid), PreconditionError);
  }
}
