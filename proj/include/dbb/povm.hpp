#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dbb/errors.hpp"
#include "dbb/fields.hpp"
#include "dbb/rng.hpp"
#include "dbb/vec.hpp"

namespace dbb {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Operator families and the POVM axioms
// ---------------------------------------------------------------------------

struct OperatorFamily {
  int dim = 0;
  std::vector<MatrixXc> members;
  std::vector<std::string> labels;
};

struct PovmCheckReport {
  double max_hermiticity_violation = 0.0;
  double min_eigenvalue = 0.0;
  double max_completeness_violation = 0.0;

  bool passes(double tol = 1e-10) const {
    return max_hermiticity_violation < tol && min_eigenvalue > -tol &&
           max_completeness_violation < tol;
  }
};

/// Certifies hermiticity, positivity (eigenvalues of the symmetrized member)
/// and completeness (sum to identity).
inline PovmCheckReport check_povm(const OperatorFamily& family) {
  PovmCheckReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  MatrixXc sum = MatrixXc::Zero(family.dim, family.dim);
  for (const auto& o : family.members) {
    rep.max_hermiticity_violation = std::max(
        rep.max_hermiticity_violation, (o - o.adjoint()).cwiseAbs().maxCoeff());
    const MatrixXc sym = 0.5 * (o + o.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(sym);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
    sum += o;
  }
  rep.max_completeness_violation =
      (sum - MatrixXc::Identity(family.dim, family.dim)).cwiseAbs().maxCoeff();
  return rep;
}

// ---------------------------------------------------------------------------
// Pointer-measurement construction
// ---------------------------------------------------------------------------

/// Generalized von Neumann measurement: system of dimension dS coupled to a
/// pointer of dimension dM through a joint unitary, pointer prepared in
/// phi0, outcomes labelled by disjoint pointer-index sets covering all
/// indices. Joint index convention: q * dM + xi.
struct PointerModel {
  int dS = 2;
  int dM = 2;
  MatrixXc U;
  VectorXc phi0;
  std::vector<std::vector<int>> partition;
};

inline void validate_pointer_model(const PointerModel& m, double tol = 1e-10) {
  const int d = m.dS * m.dM;
  if (m.U.rows() != d || m.U.cols() != d)
    throw PreconditionError("pointer model: U has wrong dimensions");
  if ((m.U.adjoint() * m.U - MatrixXc::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
    throw PreconditionError("pointer model: U is not unitary");
  if (m.phi0.size() != m.dM) throw PreconditionError("pointer model: phi0 size mismatch");
  if (std::abs(m.phi0.norm() - 1.0) > tol)
    throw PreconditionError("pointer model: phi0 is not normalized");
  std::vector<int> seen(m.dM, 0);
  for (const auto& cell : m.partition)
    for (int xi : cell) {
      if (xi < 0 || xi >= m.dM || seen[xi]++)
        throw PreconditionError("pointer model: partition is not an exact cover");
    }
  for (int c : seen)
    if (!c) throw PreconditionError("pointer model: partition is not an exact cover");
}

/// O_n = <phi0| U^dag Pi_n U |phi0> on the system space: matrix elements
/// <j|O_n|i> = <U(e_j x phi0)| Pi_n |U(e_i x phi0)>.
inline OperatorFamily construct_pointer_povm(const PointerModel& m) {
  validate_pointer_model(m);
  const int d = m.dS * m.dM;

  // columns: evolved joint states for each system basis vector
  MatrixXc evolved(d, m.dS);
  for (int i = 0; i < m.dS; ++i) {
    VectorXc joint = VectorXc::Zero(d);
    for (int xi = 0; xi < m.dM; ++xi) joint(i * m.dM + xi) = m.phi0(xi);
    evolved.col(i) = m.U * joint;
  }

  OperatorFamily fam;
  fam.dim = m.dS;
  for (std::size_t n = 0; n < m.partition.size(); ++n) {
    MatrixXc o = MatrixXc::Zero(m.dS, m.dS);
    for (int j = 0; j < m.dS; ++j)
      for (int i = 0; i < m.dS; ++i) {
        complexd acc = 0.0;
        for (int q = 0; q < m.dS; ++q)
          for (int xi : m.partition[n])
            acc += std::conj(evolved(q * m.dM + xi, j)) * evolved(q * m.dM + xi, i);
        o(j, i) = acc;
      }
    fam.members.push_back(std::move(o));
    fam.labels.push_back("O" + std::to_string(n));
  }
  return fam;
}

/// Pointer-in-cell probabilities computed directly from the evolved joint
/// state U(psi x phi0); the oracle the construction must reproduce.
inline std::vector<double> pointer_probabilities_direct(const PointerModel& m,
                                                        const VectorXc& psi) {
  validate_pointer_model(m);
  const int d = m.dS * m.dM;
  VectorXc joint = VectorXc::Zero(d);
  for (int q = 0; q < m.dS; ++q)
    for (int xi = 0; xi < m.dM; ++xi) joint(q * m.dM + xi) = psi(q) * m.phi0(xi);
  const VectorXc out = m.U * joint;
  std::vector<double> probs(m.partition.size(), 0.0);
  for (std::size_t n = 0; n < m.partition.size(); ++n)
    for (int q = 0; q < m.dS; ++q)
      for (int xi : m.partition[n]) probs[n] += std::norm(out(q * m.dM + xi));
  return probs;
}

// ---------------------------------------------------------------------------
// Seeded random models
// ---------------------------------------------------------------------------

inline MatrixXc random_unitary(int dim, Rng& rng) {
  MatrixXc g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = complexd(rng.normal(), rng.normal());
  Eigen::HouseholderQR<MatrixXc> qr(g);
  MatrixXc q = qr.householderQ();
  const MatrixXc r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i) {
    const complexd rii = r(i, i);
    q.col(i) *= (std::abs(rii) > 0.0) ? rii / std::abs(rii) : complexd(1.0);
  }
  return q;
}

inline VectorXc random_state(int dim, Rng& rng) {
  VectorXc v(dim);
  for (int i = 0; i < dim; ++i) v(i) = complexd(rng.normal(), rng.normal());
  v.normalize();
  return v;
}

/// Random pointer model with a contiguous partition into n_outcomes cells.
inline PointerModel random_pointer_model(int dS, int dM, int n_outcomes,
                                         std::uint64_t seed) {
  if (n_outcomes < 1 || n_outcomes > dM)
    throw PreconditionError("random_pointer_model: bad outcome count");
  Rng rng = stream_rng(seed, 0x706f766dULL);
  PointerModel m;
  m.dS = dS;
  m.dM = dM;
  m.U = random_unitary(dS * dM, rng);
  m.phi0 = random_state(dM, rng);
  m.partition.assign(n_outcomes, {});
  for (int xi = 0; xi < dM; ++xi)
    m.partition[std::min<int>(xi * n_outcomes / dM, n_outcomes - 1)].push_back(xi);
  return m;
}

// ---------------------------------------------------------------------------
// |J.n| is not additive over superpositions: the non-POVM counterexample
// ---------------------------------------------------------------------------

struct CurrentAdditivityReport {
  double j1 = 0.0, j2 = 0.0, j_plus = 0.0, j_minus = 0.0;  ///< projected currents
  double signed_defect = 0.0;    ///< |J1.n + J2.n - J+.n - J-.n|, ~0 always
  double absolute_defect = 0.0;  ///< the same with absolute values, > 0 with backflow
};

/// Evaluates the additivity of the projected current and of its absolute
/// value over Psi_± = (Psi_1 ± Psi_2)/sqrt(2). The signed combination is an
/// identity of the sesquilinear current; the absolute-value combination
/// fails exactly when one superposition backflows.
inline CurrentAdditivityReport current_povm_counterexample(const WaveField& field1,
                                                           const WaveField& field2,
                                                           Vec3 x, double t,
                                                           Vec3 n = {0.0, 0.0, 1.0}) {
  if (field1.components() != 1 || field2.components() != 1)
    throw PreconditionError("counterexample requires scalar fields");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const WaveField plus = make_superposition(
      {{complexd(inv_sqrt2), field1}, {complexd(inv_sqrt2), field2}}, field1.mass);
  const WaveField minus = make_superposition(
      {{complexd(inv_sqrt2), field1}, {complexd(-inv_sqrt2), field2}}, field1.mass);

  CurrentAdditivityReport rep;
  rep.j1 = dot(current(field1, x, t), n);
  rep.j2 = dot(current(field2, x, t), n);
  if (!(rep.j1 > 0.0) || !(rep.j2 > 0.0))
    throw PreconditionError("counterexample requires J1.n > 0 and J2.n > 0");
  rep.j_plus = dot(current(plus, x, t), n);
  rep.j_minus = dot(current(minus, x, t), n);
  rep.signed_defect = std::abs(rep.j1 + rep.j2 - rep.j_plus - rep.j_minus);
  rep.absolute_defect = std::abs(std::abs(rep.j1) + std::abs(rep.j2) -
                                 std::abs(rep.j_plus) - std::abs(rep.j_minus));
  return rep;
}

// ---------------------------------------------------------------------------
// Basis-sum (no-signalling) identity for spin-summed distributions
// ---------------------------------------------------------------------------

struct GtzReport {
  double max_deviation = 0.0;
  double tau_at_max = 0.0;
  std::vector<double> lhs, rhs;  ///< (+z) + (-z) and (+x) + (-x)
};

/// lhs = P_{+z} + P_{-z}, rhs = P_{+x} + P_{-x} on a common grid. Any
/// POVM-governed family satisfies lhs = rhs; first-arrival dBB
/// distributions need not.
inline GtzReport gtz_sum_test(const std::map<std::string, std::vector<double>>& dists,
                              const std::vector<double>& tau_grid) {
  const char* labels[4] = {"+z", "-z", "+x", "-x"};
  for (const char* l : labels)
    if (!dists.count(l)) throw PreconditionError(std::string("missing label ") + l);
  const std::size_t n = tau_grid.size();
  for (const auto& [k, v] : dists)
    if (v.size() != n) throw PreconditionError("gtz_sum_test: grid mismatch for " + k);

  GtzReport rep;
  rep.lhs.resize(n);
  rep.rhs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep.lhs[i] = dists.at("+z")[i] + dists.at("-z")[i];
    rep.rhs[i] = dists.at("+x")[i] + dists.at("-x")[i];
    const double dev = std::abs(rep.lhs[i] - rep.rhs[i]);
    if (dev > rep.max_deviation) {
      rep.max_deviation = dev;
      rep.tau_at_max = tau_grid[i];
    }
  }
  return rep;
}

}  // namespace dbb
