#pragma once

// Two-outcome collective measurement of the whole MSS and the post-selected
// two-qubit state.
//
// M_1 = i sum_m sin(theta(m)) Pi(m) acts on the total magnetization
// m = m_L + m_R. After outcome 1 each qubit branch is disentangled by U^dagger
// of its half and the MSS is traced out:
//
//   chi_kj = (U_k^dag (x) U_j^dag) M_1 (psi_k (x) psi_j)
//          = sum_mL  a_{k,mL} (x) b_{j,mL}
//   a_{k,m} = U_k^dag Pi_L(m) psi_k,   b_{j,m} = U_j^dag S(m) psi_j,
//   S(m)    = i sum_mR sin(theta(m + mR)) Pi_R(mR)
//
//   rho_q[kj, k'j'] = <chi_k'j'|chi_kj> / (4 p_select)
//
// so the Gram matrix of the chi's is sum_{m,m'} A_{k'k}(m',m) B_{j'j}(m',m)
// with one kernel per half. Kernels are linear in the half's state, so a
// product of diagonal mixtures just averages them.
//
// When U_0 = 1 and psi_0 is a basis state |b> (grade-raising circuit), U_1 is
// Hermitian and every kernel entry reduces to the psi_1 spectrum; no undo
// evolution is needed. The same kernels evaluated on model spectra give the
// large-N extrapolation.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/entanglement.hpp"
#include "mesospin/lattice.hpp"
#include "mesospin/magnification.hpp"
#include "mesospin/parallel.hpp"
#include "mesospin/spectra.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

class PhasePOVM {
 public:
  /// theta(m) = 2 pi m / (N (1 - eps)).
  static PhasePOVM linear(int n_total, double eps = 0.0) {
    if (!(eps >= 0.0 && eps < 1.0))
      throw std::invalid_argument("PhasePOVM::linear: eps must be in [0, 1); pass an explicit slope at eps = 1");
    return with_slope(n_total, 2.0 * std::numbers::pi / (n_total * (1.0 - eps)));
  }

  static PhasePOVM with_slope(int n_total, double slope) {
    if (!std::isfinite(slope)) throw std::invalid_argument("PhasePOVM: slope must be finite");
    PhasePOVM p(n_total, [slope](double m) { return slope * m; });
    p.slope_ = slope;
    return p;
  }

  static PhasePOVM custom(int n_total, std::function<double(double)> theta) {
    return PhasePOVM(n_total, std::move(theta));
  }

  int n_total() const { return n_; }
  std::optional<double> slope() const { return slope_; }
  double theta(double m) const { return theta_(m); }
  double sin_theta(double m) const { return std::sin(theta_(m)); }
  double cos_theta(double m) const { return std::cos(theta_(m)); }

  /// E_1 and E_0 eigenvalues on sector m.
  double e1(double m) const { return sin_theta(m) * sin_theta(m); }
  double e0(double m) const { return cos_theta(m) * cos_theta(m); }

 private:
  PhasePOVM(int n, std::function<double(double)> theta) : n_(n), theta_(std::move(theta)) {
    if (n < 1) throw std::invalid_argument("PhasePOVM: n_total must be positive");
  }

  int n_;
  std::function<double(double)> theta_;
  std::optional<double> slope_;
};

struct PovmBranch {
  StateVector state;  // sub-normalized
  double weight;      // squared norm
};

inline void check_povm_register(const PhasePOVM& povm, int n_state, int n_other, const char* what) {
  if (n_other < 0 || povm.n_total() != n_state + n_other)
    throw std::invalid_argument(std::string(what) + ": POVM size does not match N_L + N_R");
}

/// M_1 on a register whose magnetization adds to `shift` contributed by
/// n_other spins outside it.
inline PovmBranch povm_apply(const PhasePOVM& povm, const StateVector& v, double shift = 0.0, int n_other = 0) {
  check_povm_register(povm, v.n_spins(), n_other, "povm_apply");
  const int n = v.n_spins();
  std::vector<cplx> factor(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) factor[static_cast<std::size_t>(k)] = cplx(0, povm.sin_theta(shift + magnetization_of_downs(n, k)));
  PovmBranch out{StateVector(n), 0.0};
  for (std::size_t i = 0; i < v.dim(); ++i) out.state[Bitmask(i)] = factor[static_cast<std::size_t>(popcount(Bitmask(i)))] * v[Bitmask(i)];
  out.weight = out.state.norm_squared();
  return out;
}

/// Outcome 1 realized physically: couple the register to a two-level
/// apparatus with U_M = sum_m Pi(m) (x) exp(-i theta(m) sigma_y), start the
/// apparatus in |0>, then project it onto |1>. The apparatus is bit n.
inline PovmBranch apparatus_outcome(const PhasePOVM& povm, const StateVector& v, double shift = 0.0,
                                    int n_other = 0) {
  check_povm_register(povm, v.n_spins(), n_other, "apparatus_outcome");
  const int n = v.n_spins();
  StateVector joint = tensor(v, StateVector::basis(1, 0));
  const Bitmask app = Bitmask{1} << n;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const auto b = Bitmask(i);
    const double th = povm.theta(shift + magnetization(n, b));
    Eigen::Matrix2cd sy;
    sy << 0.0, cplx(0, -1), cplx(0, 1), 0.0;
    // exp(-i th sigma_y) = cos(th) 1 - i sin(th) sigma_y
    const Eigen::Matrix2cd u = std::cos(th) * Eigen::Matrix2cd::Identity() - cplx(0, 1) * std::sin(th) * sy;
    const Eigen::Vector2cd in(joint[b], joint[b | app]);
    const Eigen::Vector2cd o = u * in;
    joint[b] = o[0];
    joint[b | app] = o[1];
  }
  PovmBranch out{StateVector(n), 0.0};
  for (std::size_t i = 0; i < v.dim(); ++i) out.state[Bitmask(i)] = joint[Bitmask(i) | app];
  out.weight = out.state.norm_squared();
  return out;
}

/// Per-half Gram kernels, indexed [2*k' + k](i', i) over the left half's
/// down-counts i, i'.
struct HalfKernels {
  int n_left = 0;
  std::array<Eigen::MatrixXcd, 4> A;
  std::array<Eigen::MatrixXcd, 4> B;

  explicit HalfKernels(int nl = 0) : n_left(nl) {
    for (auto& m : A) m = Eigen::MatrixXcd::Zero(nl + 1, nl + 1);
    for (auto& m : B) m = Eigen::MatrixXcd::Zero(nl + 1, nl + 1);
  }

  HalfKernels& operator+=(const HalfKernels& o) {
    for (int i = 0; i < 4; ++i) {
      A[static_cast<std::size_t>(i)] += o.A[static_cast<std::size_t>(i)];
      B[static_cast<std::size_t>(i)] += o.B[static_cast<std::size_t>(i)];
    }
    return *this;
  }
};

/// Unitary undo of one half's circuit: v -> U_k^dagger v.
using Disentangler = std::function<StateVector(int, const StateVector&)>;

inline Disentangler disentangler_of(std::shared_ptr<const MagnificationCircuit> c, EvolveReport* report = nullptr) {
  return [c, report](int k, const StateVector& v) { return c->undo(k, v, report); };
}

namespace detail {

inline StateVector project_downs(const StateVector& v, int k) {
  StateVector out(v.n_spins());
  for (std::size_t i = 0; i < v.dim(); ++i)
    if (popcount(Bitmask(i)) == k) out[Bitmask(i)] = v[Bitmask(i)];
  return out;
}

inline Eigen::MatrixXcd gram_of(const std::vector<std::optional<StateVector>>& x,
                                const std::vector<std::optional<StateVector>>& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      if (x[static_cast<std::size_t>(r)] && y[static_cast<std::size_t>(c)])
        g(r, c) = inner(*x[static_cast<std::size_t>(r)], *y[static_cast<std::size_t>(c)]);
  return g;
}

}  // namespace detail

/// A kernel of a pure left half from explicit disentangled vectors.
inline void accumulate_explicit_A(HalfKernels& kern, double weight, const BranchState& br, const Disentangler& undo) {
  const int n = br.n_spins();
  if (n != kern.n_left) throw std::invalid_argument("accumulate_explicit_A: register mismatch");
  std::array<std::vector<std::optional<StateVector>>, 2> a;
  for (int k = 0; k < 2; ++k) {
    const StateVector& psi = k ? br.psi1 : br.psi0;
    for (int i = 0; i <= n; ++i) {
      auto p = detail::project_downs(psi, i);
      a[static_cast<std::size_t>(k)].push_back(p.norm_squared() > 0.0 ? std::optional(undo(k, p)) : std::nullopt);
    }
  }
  for (int kp = 0; kp < 2; ++kp)
    for (int k = 0; k < 2; ++k)
      kern.A[static_cast<std::size_t>(2 * kp + k)] +=
          weight * detail::gram_of(a[static_cast<std::size_t>(kp)], a[static_cast<std::size_t>(k)]);
}

/// B kernel of a pure right half from explicit disentangled vectors.
inline void accumulate_explicit_B(HalfKernels& kern, const PhasePOVM& povm, double weight, const BranchState& br,
                                  const Disentangler& undo) {
  const int nl = kern.n_left;
  std::array<std::vector<std::optional<StateVector>>, 2> b;
  for (int j = 0; j < 2; ++j) {
    const StateVector& psi = j ? br.psi1 : br.psi0;
    for (int i = 0; i <= nl; ++i) {
      auto s = povm_apply(povm, psi, magnetization_of_downs(nl, i), nl);
      b[static_cast<std::size_t>(j)].push_back(s.weight > 0.0 ? std::optional(undo(j, s.state)) : std::nullopt);
    }
  }
  for (int jp = 0; jp < 2; ++jp)
    for (int j = 0; j < 2; ++j)
      kern.B[static_cast<std::size_t>(2 * jp + j)] +=
          weight * detail::gram_of(b[static_cast<std::size_t>(jp)], b[static_cast<std::size_t>(j)]);
}

/// A kernel for branch 0 = |b> (b with kb downs), branch 1 = U_1|b>, U_0 = 1,
/// U_1 Hermitian. p1 is the psi_1 spectrum.
inline void accumulate_spectral_A(HalfKernels& kern, double weight, int kb, const Spectrum& p1) {
  const int n = kern.n_left;
  if (p1.n_spins() != n || kb < 0 || kb > n) throw std::invalid_argument("accumulate_spectral_A: register mismatch");
  auto& a00 = kern.A[0];
  auto& a01 = kern.A[1];
  auto& a10 = kern.A[2];
  auto& a11 = kern.A[3];
  a00(kb, kb) += weight;
  for (int i = 0; i <= n; ++i) {
    a11(i, i) += weight * p1[i];
    a01(kb, i) += weight * p1[i];
    a10(i, kb) += weight * p1[i];
  }
}

inline void accumulate_spectral_B(HalfKernels& kern, const PhasePOVM& povm, double weight, int kb,
                                  const Spectrum& p1) {
  const int nl = kern.n_left;
  const int nr = p1.n_spins();
  check_povm_register(povm, nr, nl, "accumulate_spectral_B");
  if (kb < 0 || kb > nr) throw std::invalid_argument("accumulate_spectral_B: down count out of range");
  Eigen::MatrixXd s(nl + 1, nr + 1);
  for (int i = 0; i <= nl; ++i)
    for (int r = 0; r <= nr; ++r) s(i, r) = povm.sin_theta(magnetization_of_downs(nl, i) + magnetization_of_downs(nr, r));
  Eigen::VectorXd p(nr + 1);
  for (int r = 0; r <= nr; ++r) p[r] = p1[r];
  const Eigen::VectorXd g = s * p;           // g(i) = sum_r s(i, r) P1(r)
  const Eigen::VectorXd s0 = s.col(kb);      // s(i, kb)
  kern.B[0] += weight * (s0 * s0.transpose()).cast<cplx>();
  kern.B[3] += weight * (s * p.asDiagonal() * s.transpose()).cast<cplx>();
  kern.B[1] += weight * (s0 * g.transpose()).cast<cplx>();  // (i', i) -> s(i', kb) g(i)
  kern.B[2] += weight * (g * s0.transpose()).cast<cplx>();
}

enum class PipelineRoute { Auto, Explicit, Spectral };

struct JointOutcome {
  double p_select = 0.0;
  QubitDensityMatrix rho_q = QubitDensityMatrix::Zero();
  double c0101 = 0.0;
  double c1010 = 0.0;
  double c0110 = 0.0;          // Re rho_q(01, 10)
  double population = 0.0;     // c0101 + c1010
  double coherence_rel = 0.0;  // c0110 / c0101
  double fidelity = 0.0;
  double discarded_mass = 0.0;
  std::string route;
  std::vector<std::string> warnings;
  EvolveReport report;
};

inline constexpr double kPSelectFloor = 1e-12;

/// rho_q from combined kernels (A from the left half, B from the right).
inline JointOutcome assemble_outcome(const HalfKernels& left, const HalfKernels& right) {
  if (left.n_left != right.n_left) throw std::invalid_argument("assemble_outcome: kernel grids differ");
  QubitDensityMatrix g;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int kp = 0; kp < 2; ++kp)
        for (int jp = 0; jp < 2; ++jp)
          g(2 * k + j, 2 * kp + jp) = left.A[static_cast<std::size_t>(2 * kp + k)]
                                          .cwiseProduct(right.B[static_cast<std::size_t>(2 * jp + j)])
                                          .sum();
  g *= 0.25;
  JointOutcome out;
  out.p_select = g.trace().real();
  if (!(out.p_select >= kPSelectFloor))
    throw PostSelectionError("joint pipeline: outcome-1 probability " + std::to_string(out.p_select) +
                             " is below the 1e-12 floor; post-selection impossible");
  out.rho_q = g / out.p_select;
  out.rho_q = 0.5 * (out.rho_q + out.rho_q.adjoint()).eval();
  out.c0101 = out.rho_q(1, 1).real();
  out.c1010 = out.rho_q(2, 2).real();
  out.c0110 = out.rho_q(1, 2).real();
  out.population = out.c0101 + out.c1010;
  out.coherence_rel = out.c0101 > 0.0 ? out.c0110 / out.c0101 : 0.0;
  out.fidelity = fidelity_m0(out.rho_q);
  return out;
}

/// Both kernels for a half whose branch-0 down-count is distributed as p0 and
/// whose psi_1 spectrum is p1 for every branch-0 term. Equivalent to the
/// per-term accumulators summed over p0, in O(n^3) instead of O(n^4).
inline void accumulate_spectral_distribution(HalfKernels& a_kern, HalfKernels& b_kern, const PhasePOVM& povm,
                                             const Spectrum& p0, const Spectrum& p1) {
  const int nl = a_kern.n_left;
  const int nr = p1.n_spins();
  if (p0.n_spins() != nr || b_kern.n_left != nl || nl != nr)
    throw std::invalid_argument("accumulate_spectral_distribution: halves must have equal size");
  check_povm_register(povm, nr, nl, "accumulate_spectral_distribution");
  Eigen::VectorXd w(nr + 1), p(nr + 1);
  for (int r = 0; r <= nr; ++r) {
    w[r] = p0[r];
    p[r] = p1[r];
  }
  const double wsum = w.sum();
  a_kern.A[0] += Eigen::MatrixXd(w.asDiagonal()).cast<cplx>();
  a_kern.A[3] += (wsum * Eigen::MatrixXd(p.asDiagonal())).cast<cplx>();
  a_kern.A[1] += (w * p.transpose()).cast<cplx>();
  a_kern.A[2] += (p * w.transpose()).cast<cplx>();

  Eigen::MatrixXd s(nl + 1, nr + 1);
  for (int i = 0; i <= nl; ++i)
    for (int r = 0; r <= nr; ++r) s(i, r) = povm.sin_theta(magnetization_of_downs(nl, i) + magnetization_of_downs(nr, r));
  const Eigen::VectorXd g = s * p;
  const Eigen::VectorXd sw = s * w;  // sum_b w_b s(i, kb)
  b_kern.B[0] += (s * w.asDiagonal() * s.transpose()).cast<cplx>();
  b_kern.B[3] += (wsum * (s * p.asDiagonal() * s.transpose())).cast<cplx>();
  b_kern.B[1] += (sw * g.transpose()).cast<cplx>();
  b_kern.B[2] += (g * sw.transpose()).cast<cplx>();
}

/// Post-selected state when both halves share the branch-0 distribution p0
/// and psi_1 spectrum p1 (U_0 = 1 circuits).
inline JointOutcome spectral_outcome(const Spectrum& p0, const Spectrum& p1, const PhasePOVM& povm) {
  HalfKernels a(p0.n_spins()), b(p0.n_spins());
  accumulate_spectral_distribution(a, b, povm, p0, p1);
  auto out = assemble_outcome(a, b);
  out.route = "spectral";
  return out;
}

/// Single nonzero amplitude -> its bitmask.
inline std::optional<Bitmask> basis_state_of(const StateVector& v) {
  std::optional<Bitmask> found;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[Bitmask(i)] == cplx{}) continue;
    if (found) return std::nullopt;
    found = Bitmask(i);
  }
  return found;
}

/// A half prepared by a magnification circuit; `undo` is U_k^dagger.
struct PreparedHalf {
  BranchState branch;
  Disentangler undo;
  bool branch0_identity = false;  // U_0 = 1 and U_1 Hermitian
};

inline PreparedHalf prepared(const MagnificationResult& r, EvolveReport* report = nullptr) {
  return {r.branch, disentangler_of(r.circuit, report), r.circuit->branch0_identity()};
}

/// Post-selected two-qubit state for two pure halves.
inline JointOutcome joint_pipeline(const PreparedHalf& left, const PreparedHalf& right, const PhasePOVM& povm,
                                   PipelineRoute route = PipelineRoute::Auto) {
  left.branch.validate();
  right.branch.validate();
  const int nl = left.branch.n_spins();
  check_povm_register(povm, right.branch.n_spins(), nl, "joint_pipeline");
  const auto bl = basis_state_of(left.branch.psi0);
  const auto br = basis_state_of(right.branch.psi0);
  const bool spectral_ok = left.branch0_identity && right.branch0_identity && bl && br;
  if (route == PipelineRoute::Spectral && !spectral_ok)
    throw std::invalid_argument("joint_pipeline: spectral route needs U_0 = 1 and basis-state branch 0");
  const bool spectral = route == PipelineRoute::Spectral || (route == PipelineRoute::Auto && spectral_ok);

  HalfKernels kl(nl), kr(nl);
  if (spectral) {
    accumulate_spectral_A(kl, 1.0, popcount(*bl), spectrum_of(left.branch.psi1));
    accumulate_spectral_B(kr, povm, 1.0, popcount(*br), spectrum_of(right.branch.psi1));
  } else {
    accumulate_explicit_A(kl, 1.0, left.branch, left.undo);
    accumulate_explicit_B(kr, povm, 1.0, right.branch, right.undo);
  }
  auto out = assemble_outcome(kl, kr);
  out.route = spectral ? "spectral" : "explicit";
  return out;
}

inline JointOutcome joint_pipeline(const MagnificationResult& left, const MagnificationResult& right,
                                   const PhasePOVM& povm, PipelineRoute route = PipelineRoute::Auto) {
  if (left.protocol != right.protocol)
    throw std::invalid_argument("joint_pipeline: halves must be prepared by the same protocol");
  EvolveReport rep;
  auto out = joint_pipeline(prepared(left, &rep), prepared(right, &rep), povm, route);
  out.report = rep;
  return out;
}

/// Kernels of one half in a diagonal mixture: each basis term is magnified as
/// a pure branch.
struct MixtureKernels {
  HalfKernels a;  // as the left half
  HalfKernels b;  // as the right half
  double discarded_mass = 0.0;
  EvolveReport report;
};

inline MixtureKernels mixture_kernels(const DiagonalMixture& mix, const MagnificationCircuit& circuit,
                                      const PhasePOVM& povm, int n_left, PipelineRoute route) {
  if (mix.n_spins != circuit.n_spins()) throw std::invalid_argument("joint_pipeline_mixed: mixture/lattice mismatch");
  const bool spectral = route == PipelineRoute::Spectral ||
                        (route == PipelineRoute::Auto && circuit.branch0_identity());
  if (spectral && !circuit.branch0_identity())
    throw std::invalid_argument("joint_pipeline_mixed: spectral route needs U_0 = 1");

  struct TermResult {
    HalfKernels a, b;
    EvolveReport rep;
  };
  auto per_term = parallel_map(mix.terms.size(), [&](std::size_t idx) {
    const auto& term = mix.terms[idx];
    TermResult r{HalfKernels(n_left), HalfKernels(n_left), {}};
    const StateVector b0 = StateVector::basis(mix.n_spins, term.bitmask);
    BranchState br{b0, circuit.apply(1, b0, &r.rep)};
    if (spectral) {
      const auto p1 = spectrum_of(br.psi1);
      accumulate_spectral_A(r.a, term.probability, popcount(term.bitmask), p1);
      accumulate_spectral_B(r.b, povm, term.probability, popcount(term.bitmask), p1);
    } else {
      Disentangler undo = [&](int k, const StateVector& v) { return circuit.undo(k, v, &r.rep); };
      accumulate_explicit_A(r.a, term.probability, br, undo);
      accumulate_explicit_B(r.b, povm, term.probability, br, undo);
    }
    return r;
  });
  MixtureKernels out{HalfKernels(n_left), HalfKernels(n_left), mix.discarded_mass, {}};
  for (const auto& r : per_term) {  // fixed order
    out.a += r.a;
    out.b += r.b;
    out.report += r.rep;
  }
  return out;
}

/// Post-selected two-qubit state for two halves in diagonal mixtures.
inline JointOutcome joint_pipeline_mixed(const DiagonalMixture& mix_left, const DiagonalMixture& mix_right,
                                         const MagnificationCircuit& circuit, const PhasePOVM& povm,
                                         PipelineRoute route = PipelineRoute::Auto) {
  const int nl = mix_left.n_spins;
  check_povm_register(povm, mix_right.n_spins, nl, "joint_pipeline_mixed");
  auto kl = mixture_kernels(mix_left, circuit, povm, nl, route);
  const bool same = mix_left.n_spins == mix_right.n_spins && mix_left.terms.size() == mix_right.terms.size() &&
                    std::equal(mix_left.terms.begin(), mix_left.terms.end(), mix_right.terms.begin(),
                               [](const MixtureTerm& x, const MixtureTerm& y) {
                                 return x.bitmask == y.bitmask && x.probability == y.probability;
                               });
  JointOutcome out;
  if (same) {
    out = assemble_outcome(kl.a, kl.b);
    out.report = kl.report;
  } else {
    auto kr = mixture_kernels(mix_right, circuit, povm, nl, route);
    out = assemble_outcome(kl.a, kr.b);
    out.report = kl.report;
    out.report += kr.report;
  }
  out.route = (route == PipelineRoute::Explicit || !circuit.branch0_identity()) ? "explicit" : "spectral";
  out.discarded_mass = std::max(mix_left.discarded_mass, mix_right.discarded_mass);
  if (out.discarded_mass > 1e-6 * (1.0 + 1e-9))
    out.warnings.push_back("mixture truncation discarded probability mass " + std::to_string(out.discarded_mass) +
                           " (above 1e-6)");
  return out;
}

/// Grade-raising circuit on both halves, each starting in rho_in(N_h, eps).
inline JointOutcome joint_pipeline_mixed(const DiagonalMixture& mix_left, const DiagonalMixture& mix_right,
                                         const Lattice& lattice, double t, const PhasePOVM& povm,
                                         const PropagatorConfig& cfg = {}) {
  const auto circuit = MagnificationCircuit::gr(lattice, t, cfg);
  return joint_pipeline_mixed(mix_left, mix_right, circuit, povm);
}

}  // namespace mesospin
