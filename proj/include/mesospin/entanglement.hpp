#pragma once

// Entanglement quantifiers: Bell fidelity, negativity, von Neumann entropy,
// entanglement of projection under single-spin loss, and the loss-limited
// fidelity bound.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/density.hpp"
#include "mesospin/magnification.hpp"
#include "mesospin/parallel.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

/// Two-qubit density matrix in the basis |00>,|01>,|10>,|11> (index 2k + j).
using QubitDensityMatrix = Eigen::Matrix4cd;

/// <m0|rho|m0> with |m0> = (|01> + |10>)/sqrt(2).
inline double fidelity_m0(const QubitDensityMatrix& rho) {
  return 0.5 * (rho(1, 1) + rho(2, 2) + rho(1, 2) + rho(2, 1)).real();
}

inline constexpr int kMaxNegativitySpins = 12;

/// Sum of |negative eigenvalues| of a Hermitian matrix. The matrix is split
/// into the connected blocks of its sparsity pattern first, which is exact and
/// turns conserved-quantity structure into smaller eigenproblems.
inline double negative_eigenvalue_mass(const DenseMatrix& m) {
  const Eigen::Index d = m.rows();
  std::vector<int> comp(static_cast<std::size_t>(d), -1);
  int ncomp = 0;
  std::vector<Eigen::Index> stack;
  for (Eigen::Index s = 0; s < d; ++s) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    comp[static_cast<std::size_t>(s)] = ncomp;
    stack.push_back(s);
    while (!stack.empty()) {
      const Eigen::Index r = stack.back();
      stack.pop_back();
      for (Eigen::Index c = 0; c < d; ++c) {
        if (comp[static_cast<std::size_t>(c)] < 0 && m(r, c) != cplx{}) {
          comp[static_cast<std::size_t>(c)] = ncomp;
          stack.push_back(c);
        }
      }
    }
    ++ncomp;
  }
  double neg = 0.0;
  for (int k = 0; k < ncomp; ++k) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < d; ++i)
      if (comp[static_cast<std::size_t>(i)] == k) idx.push_back(i);
    const auto n = static_cast<Eigen::Index>(idx.size());
    DenseMatrix block(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        block(i, j) = m(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(block, Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < n; ++i)
      if (es.eigenvalues()[i] < 0.0) neg -= es.eigenvalues()[i];
  }
  return neg;
}

/// Negativity across the split (subsystem | rest).
inline double negativity(const DenseMatrix& rho, int n, std::span<const int> subsystem) {
  if (n > kMaxNegativitySpins)
    throw std::invalid_argument("negativity: joint dimension above 2^12 is beyond the dense eigensolver");
  return negative_eigenvalue_mass(partial_transpose(rho, n, subsystem));
}

inline double negativity(const DensityOperator& rho, std::span<const int> subsystem) {
  return negativity(rho.matrix(), rho.n_spins(), subsystem);
}

inline double log_negativity_from(double neg) { return std::log2(2.0 * neg + 1.0); }

inline double log_negativity(const DenseMatrix& rho, int n, std::span<const int> subsystem) {
  return log_negativity_from(negativity(rho, n, subsystem));
}

inline double log_negativity(const DensityOperator& rho, std::span<const int> subsystem) {
  return log_negativity_from(negativity(rho, subsystem));
}

/// Entropy in bits of a probability vector; eigenvalues in (-1e-9, 0) are
/// treated as 0 and terms with p <= 1e-15 drop out.
inline double entropy_bits(std::span<const double> p) {
  double s = 0.0;
  for (double x : p) {
    if (x < -1e-9) throw std::invalid_argument("entropy: eigenvalue below -1e-9");
    if (x > 1e-15) s -= x * std::log2(x);
  }
  return s;
}

inline double von_neumann_entropy(const DenseMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(rho, Eigen::EigenvaluesOnly);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return entropy_bits(ev);
}

inline double von_neumann_entropy(const DensityOperator& rho) { return von_neumann_entropy(rho.matrix()); }

/// Entanglement entropy of a pure bipartite state, from the marginal on `part`.
inline double entanglement_entropy(const StateVector& v, std::span<const int> part) {
  return von_neumann_entropy(partial_trace(DensityOperator::pure(v), part));
}

/// Qubit-MSS negativity of a branch state; pure, so it follows from the
/// Schmidt coefficients of the qubit marginal.
inline double branch_negativity(const BranchState& b) {
  const double n00 = 0.5 * b.psi0.norm_squared();
  const double n11 = 0.5 * b.psi1.norm_squared();
  const cplx n01 = 0.5 * inner(b.psi1, b.psi0);
  Eigen::Matrix2cd rq;
  rq << n00, n01, std::conj(n01), n11;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(rq, Eigen::EigenvaluesOnly);
  const double l0 = std::max(0.0, es.eigenvalues()[0]);
  const double l1 = std::max(0.0, es.eigenvalues()[1]);
  const double s = std::sqrt(l0) + std::sqrt(l1);
  return 0.5 * (s * s - 1.0);
}

/// Joint density operator sum_i w_i |phi_i><phi_i| of weighted branch states,
/// with the qubit on bit n.
inline DenseMatrix branch_mixture_density(std::span<const BranchState> branches, std::span<const double> weights) {
  if (branches.empty() || branches.size() != weights.size())
    throw std::invalid_argument("branch_mixture_density: need one weight per branch");
  const int n = branches.front().n_spins() + 1;
  if (n > kMaxDenseSpins + 1)
    throw std::invalid_argument("branch_mixture_density: register too large for a dense operator");
  const auto d = static_cast<Eigen::Index>(basis_dim(n));
  DenseMatrix y(d, static_cast<Eigen::Index>(branches.size()));
  for (std::size_t i = 0; i < branches.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("branch_mixture_density: negative weight");
    const auto joint = branches[i].joint();
    const double w = std::sqrt(weights[i]);
    for (Eigen::Index r = 0; r < d; ++r) y(r, static_cast<Eigen::Index>(i)) = w * joint[Bitmask(r)];
  }
  return y * y.adjoint();
}

struct MixedNegativity {
  double negativity;
  double log_negativity;
  double discarded_mass;
  std::size_t terms;
  EvolveReport report;
};

/// Qubit-MSS negativity after the grade-raising circuit acting on the
/// partially polarized mixture: every basis term is a pure branch state and
/// the joint operator is their weighted sum.
inline MixedNegativity micro_macro_negativity(const Lattice& lattice, double t, double eps,
                                              const PropagatorConfig& cfg = {},
                                              double keep_mass = kMixtureKeepMass) {
  const int n = lattice.n_spins();
  if (n + 1 > kMaxNegativitySpins)
    throw std::invalid_argument("micro_macro_negativity: joint dimension above 2^12 is beyond the dense eigensolver");
  const auto circuit = MagnificationCircuit::gr(lattice, t, cfg);
  const auto mix = mixed_polarized(n, eps, keep_mass);
  struct Term {
    BranchState branch;
    EvolveReport report;
  };
  auto evolved = parallel_map(mix.terms.size(), [&](std::size_t i) {
    Term out{{StateVector::basis(n, mix.terms[i].bitmask), {}}, {}};
    out.branch.psi1 = circuit.apply(1, out.branch.psi0, &out.report);
    return out;
  });
  std::vector<BranchState> branches;
  std::vector<double> weights;
  MixedNegativity res{0, 0, mix.discarded_mass, mix.terms.size(), {}};
  for (std::size_t i = 0; i < evolved.size(); ++i) {
    branches.push_back(std::move(evolved[i].branch));
    weights.push_back(mix.terms[i].probability);
    res.report += evolved[i].report;
  }
  const int qubit[] = {n};
  res.negativity = negativity(branch_mixture_density(branches, weights), n + 1, qubit);
  res.log_negativity = log_negativity_from(res.negativity);
  return res;
}

struct LossOutcome {
  int lost_index;
  double p_up;
  double p_down;
  double e_up;
  double e_down;
  double e_p;
};

namespace detail {

/// Entropy of the qubit in (|0>u0 + |1>u1), normalized by its weight.
inline double conditional_qubit_entropy(const std::vector<cplx>& u0, const std::vector<cplx>& u1) {
  double a = 0.0, b = 0.0;
  cplx c{};
  for (std::size_t i = 0; i < u0.size(); ++i) {
    a += std::norm(u0[i]);
    b += std::norm(u1[i]);
    c += std::conj(u1[i]) * u0[i];
  }
  const double z = a + b;
  if (z <= 0.0) return 0.0;
  Eigen::Matrix2cd rq;
  rq << a / z, c / z, std::conj(c) / z, b / z;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(rq, Eigen::EigenvaluesOnly);
  const double ev[2] = {es.eigenvalues()[0], es.eigenvalues()[1]};
  return entropy_bits(std::span<const double>(ev, 2));
}

/// Components of v with spin a fixed to `down`, as a vector over the rest.
inline std::vector<cplx> condition_spin(const StateVector& v, int a, bool down) {
  std::vector<cplx> out;
  out.reserve(v.dim() / 2);
  const Bitmask bit = Bitmask{1} << a;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const auto b = Bitmask(i);
    if (((b & bit) != 0) == down) out.push_back(v[b] / std::sqrt(2.0));
  }
  return out;
}

}  // namespace detail

/// Loses spin a: conditions the qubit-MSS pure state on the lost spin's z value
/// and averages the qubit entanglement of the two conditional states.
inline LossOutcome lose_particle(const BranchState& branch, int a) {
  branch.validate();
  if (a < 0 || a >= branch.n_spins()) throw std::out_of_range("lose_particle: spin index out of range");
  LossOutcome out{a, 0, 0, 0, 0, 0};
  for (bool down : {false, true}) {
    const auto u0 = detail::condition_spin(branch.psi0, a, down);
    const auto u1 = detail::condition_spin(branch.psi1, a, down);
    double p = 0.0;
    for (std::size_t i = 0; i < u0.size(); ++i) p += std::norm(u0[i]) + std::norm(u1[i]);
    const double e = detail::conditional_qubit_entropy(u0, u1);
    (down ? out.p_down : out.p_up) = p;
    (down ? out.e_down : out.e_up) = e;
  }
  out.e_p = out.p_up * out.e_up + out.p_down * out.e_down;
  return out;
}

/// Loss outcome averaged uniformly over every MSS spin.
inline double average_loss_ep(const BranchState& branch) {
  double s = 0.0;
  for (int a = 0; a < branch.n_spins(); ++a) s += lose_particle(branch, a).e_p;
  return s / branch.n_spins();
}

/// E_p for a symmetric branch with spin-up probability r_up per spin.
inline double ep_closed_form(double r_up) {
  if (!(r_up >= 0.0 && r_up <= 1.0)) throw std::domain_error("ep_closed_form: r_up outside [0, 1]");
  const double z = 1.0 + r_up;
  const double p[2] = {1.0 / z, r_up / z};
  return 0.5 * z * entropy_bits(std::span<const double>(p, 2));
}

/// alpha_a: amplitude of psi1 with spin a up, measured against psi0 = |up...>.
/// |alpha_a|^2 is the probability of spin a being up in psi1.
inline std::vector<double> spin_up_probabilities(const StateVector& psi1) {
  std::vector<double> r(static_cast<std::size_t>(psi1.n_spins()), 0.0);
  for (std::size_t i = 0; i < psi1.dim(); ++i) {
    const double p = std::norm(psi1[Bitmask(i)]);
    for (int a = 0; a < psi1.n_spins(); ++a)
      if (((i >> a) & 1u) == 0) r[static_cast<std::size_t>(a)] += p;
  }
  return r;
}

struct LossFidelityBound {
  double per_spin;   // mean over a of (1 + |alpha_a|^2) / 2
  double aggregate;  // 1/2 + sum_a |alpha_a| / (2 N_h)
};

/// Largest Bell fidelity retrievable after a spin is lost from one half, with
/// the lost spin replaced by |up>.
inline LossFidelityBound loss_fidelity_bounds(const BranchState& branch) {
  branch.validate();
  const auto r = spin_up_probabilities(branch.psi1);
  double per = 0.0, agg = 0.0;
  for (double x : r) {
    per += 0.5 * (1.0 + x);
    agg += std::sqrt(x);
  }
  const double n = static_cast<double>(r.size());
  return {per / n, 0.5 + agg / (2.0 * n)};
}

inline double loss_fidelity_bound(const BranchState& left, const BranchState& right) {
  require_same_register(left.psi1, right.psi1, "loss_fidelity_bound");
  return 0.5 * (loss_fidelity_bounds(left).per_spin + loss_fidelity_bounds(right).per_spin);
}

}  // namespace mesospin
