#pragma once

// exp(-i H t) v for sparse Hermitian H by Lanczos projection with full
// reorthogonalization and adaptive substepping.
//
// Each substep builds an m-dimensional Krylov basis from the current vector,
// then picks the largest step tau whose a-posteriori error estimate
//   beta * h_{m+1,m} * tau * |e_m^T phi_1(-i tau T) e_1|
// stays below tol. Because the basis does not depend on tau, the step is
// chosen after the matvecs are spent. A vanishing h_{j+1,j} means the Krylov
// space is invariant and the remaining time is taken in one exact step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <memory>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/hamiltonian.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

struct PropagatorConfig {
  int krylov_dim = 30;
  double tol = 1e-10;  // local error target per substep
  long max_substeps = 1'000'000;

  void validate() const {
    if (krylov_dim < 2 || krylov_dim > 100)
      throw std::invalid_argument("PropagatorConfig: krylov_dim must be in [2, 100]");
    if (!(tol > 0.0)) throw std::invalid_argument("PropagatorConfig: tol must be positive");
    if (max_substeps < 1) throw std::invalid_argument("PropagatorConfig: max_substeps must be >= 1");
  }
};

struct EvolveReport {
  long substeps = 0;
  long matvecs = 0;
  double error_estimate = 0.0;  // sum of accepted local estimates

  EvolveReport& operator+=(const EvolveReport& o) {
    substeps += o.substeps;
    matvecs += o.matvecs;
    error_estimate += o.error_estimate;
    return *this;
  }
};

template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const cplx> x, std::span<cplx> y) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  op.apply(x, y);
};

namespace detail {

inline double norm2(std::span<const cplx> x) {
  double s = 0.0;
  for (const auto& a : x) s += std::norm(a);
  return std::sqrt(s);
}

inline cplx phi1(cplx z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  return (std::exp(z) - 1.0) / z;
}

}  // namespace detail

/// Replaces w by exp(-i H t) w.
template <LinearOperator Op>
void krylov_expm_inplace(const Op& op, double t, std::vector<cplx>& w, const PropagatorConfig& cfg,
                         EvolveReport& report) {
  cfg.validate();
  const std::size_t d = op.dim();
  if (w.size() != d) throw std::invalid_argument("krylov_expm: dimension mismatch");
  if (!std::isfinite(t)) throw std::invalid_argument("krylov_expm: time must be finite");
  if (t == 0.0 || d == 0 || detail::norm2(w) == 0.0) return;

  const int m_max = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.krylov_dim), d));
  const double sign = t > 0 ? 1.0 : -1.0;
  const double total = std::abs(t);
  double remaining = total;
  double tau_guess = total;

  // Krylov basis as columns. Lanczos recurrence, then one full classical
  // Gram-Schmidt pass over the basis block.
  Eigen::MatrixXcd basis(static_cast<Eigen::Index>(d), m_max + 1);
  auto col = [&](int j) { return std::span<cplx>(basis.col(j).data(), d); };
  Eigen::Map<Eigen::VectorXcd> wv(w.data(), static_cast<Eigen::Index>(d));
  std::vector<double> alpha, offdiag;
  alpha.reserve(static_cast<std::size_t>(m_max));
  offdiag.reserve(static_cast<std::size_t>(m_max));

  while (remaining > 0.0) {
    if (report.substeps >= cfg.max_substeps) {
      std::ostringstream msg;
      msg << "krylov_expm: no convergence within " << cfg.max_substeps << " substeps; "
          << remaining << " of " << total << " time units left, accumulated error estimate "
          << report.error_estimate;
      throw PropagationError(msg.str());
    }
    const double beta = wv.norm();
    basis.col(0) = wv / beta;

    alpha.clear();
    offdiag.clear();
    bool invariant = false;
    double scale = 0.0;
    int m = m_max;
    double h_last = 0.0;
    for (int j = 0; j < m_max; ++j) {
      op.apply(std::span<const cplx>(col(j)), col(j + 1));
      ++report.matvecs;
      auto u = basis.col(j + 1);
      const auto prev = basis.leftCols(j + 1);
      double a = basis.col(j).dot(u).real();
      u -= a * basis.col(j);
      if (j > 0) u -= offdiag[static_cast<std::size_t>(j) - 1] * basis.col(j - 1);
      const Eigen::VectorXcd c = prev.adjoint() * u;
      a += c[j].real();
      u.noalias() -= prev * c;
      alpha.push_back(a);
      const double h = u.norm();
      scale = std::max({scale, std::abs(a), h});
      if (h <= 1e-12 * std::max(1.0, scale)) {
        invariant = true;
        m = j + 1;
        break;
      }
      if (j + 1 < m_max) offdiag.push_back(h);
      h_last = h;
      u /= h;
    }

    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd sub = Eigen::VectorXd::Zero(std::max(0, m - 1));
    for (int i = 0; i + 1 < m; ++i) sub[i] = offdiag[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Eigen::MatrixXd& q = es.eigenvectors();
    const Eigen::VectorXd& lambda = es.eigenvalues();

    auto estimate = [&](double tau) {
      if (invariant) return 0.0;
      cplx s{};
      for (int k = 0; k < m; ++k) s += q(m - 1, k) * detail::phi1(cplx(0, -sign * lambda[k] * tau)) * q(0, k);
      return beta * h_last * tau * std::abs(s);
    };

    double tau = invariant ? remaining : std::min(remaining, tau_guess);
    double err = estimate(tau);
    for (int tries = 0; err > cfg.tol; ++tries) {
      if (tries > 200) throw PropagationError("krylov_expm: step-size control failed to meet tolerance");
      tau *= std::clamp(0.9 * std::pow(cfg.tol / err, 1.0 / m), 0.05, 0.9);
      err = estimate(tau);
    }
    tau_guess = err > 0.0 ? tau * std::clamp(0.9 * std::pow(cfg.tol / err, 1.0 / m), 1.0, 5.0) : remaining;

    Eigen::VectorXcd y(m);
    for (int j = 0; j < m; ++j) {
      cplx acc{};
      for (int k = 0; k < m; ++k) acc += q(j, k) * std::exp(cplx(0, -sign * lambda[k] * tau)) * q(0, k);
      y[j] = beta * acc;
    }
    wv.noalias() = basis.leftCols(m) * y;

    remaining = (tau >= remaining) ? 0.0 : remaining - tau;
    ++report.substeps;
    report.error_estimate += err;
  }
}

struct Evolved {
  StateVector state;
  EvolveReport report;
};

/// Propagator bound to one Hamiltonian. Evolution runs block by block over the
/// sectors of the quantity H conserves, which is exact and much cheaper.
class Propagator {
 public:
  explicit Propagator(const SparseOperator& h, PropagatorConfig cfg = {})
      : h_(std::make_shared<SparseOperator>(h)), cfg_(cfg) {
    cfg_.validate();
    map_ = std::make_shared<SectorMap>(*h_);
    sectors_ = std::make_shared<std::vector<LazySector>>(static_cast<std::size_t>(map_->sector_count()));
  }

  const SparseOperator& hamiltonian() const { return *h_; }
  const PropagatorConfig& config() const { return cfg_; }

  /// exp(-i H t) v.
  Evolved evolve(double t, const StateVector& v) const {
    check_register(v);
    Evolved out{StateVector(v.n_spins()), {}};
    std::vector<cplx> block;
    for (int s = 0; s < map_->sector_count(); ++s) {
      const auto states = map_->states(s);
      block.resize(states.size());
      bool empty = true;
      for (std::size_t i = 0; i < states.size(); ++i) {
        block[i] = v[states[i]];
        if (block[i] != cplx{}) empty = false;
      }
      if (empty) continue;
      krylov_expm_inplace(sector(s), t, block, cfg_, out.report);
      for (std::size_t i = 0; i < states.size(); ++i) out.state[states[i]] = block[i];
    }
    return out;
  }

  /// Same result without the block split; used to cross-check the sectors.
  Evolved evolve_full_space(double t, const StateVector& v) const {
    check_register(v);
    Evolved out{v, {}};
    std::vector<cplx> w(v.amplitudes().begin(), v.amplitudes().end());
    krylov_expm_inplace(FullOperator(*h_), t, w, cfg_, out.report);
    out.state = StateVector(v.n_spins(), std::move(w));
    return out;
  }

 private:
  void check_register(const StateVector& v) const {
    if (v.n_spins() != h_->n_spins())
      throw std::invalid_argument("Propagator: state and Hamiltonian live on different registers");
  }

  // Blocks are built on first use; many never receive amplitude.
  struct LazySector {
    std::once_flag once;
    std::unique_ptr<SectorOperator> op;
  };

  const SectorOperator& sector(int s) const {
    auto& slot = (*sectors_)[static_cast<std::size_t>(s)];
    std::call_once(slot.once, [&] { slot.op = std::make_unique<SectorOperator>(*h_, *map_, s); });
    return *slot.op;
  }

  std::shared_ptr<SparseOperator> h_;
  PropagatorConfig cfg_;
  std::shared_ptr<SectorMap> map_;
  std::shared_ptr<std::vector<LazySector>> sectors_;
};

inline StateVector evolve(const SparseOperator& h, double t, const StateVector& v,
                          const PropagatorConfig& cfg = {}, EvolveReport* report = nullptr) {
  auto r = Propagator(h, cfg).evolve(t, v);
  if (report) *report += r.report;
  return std::move(r.state);
}

inline constexpr int kDenseOracleMaxSpins = 10;

/// Dense matrix of H; small registers only.
inline Eigen::MatrixXcd dense_matrix(const SparseOperator& h) {
  if (h.n_spins() > kDenseOracleMaxSpins)
    throw std::invalid_argument("dense_matrix: register too large for a dense matrix");
  const auto d = static_cast<Eigen::Index>(h.dim());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& e : h.entries()) {
    m(e.row, e.col) = e.value;
    m(e.col, e.row) = std::conj(e.value);
  }
  return m;
}

/// exp(-i H t) v by full eigendecomposition. Test oracle.
inline StateVector evolve_dense_oracle(const SparseOperator& h, double t, const StateVector& v) {
  if (v.n_spins() != h.n_spins()) throw std::invalid_argument("evolve_dense_oracle: register mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_matrix(h));
  const auto& q = es.eigenvectors();
  Eigen::Map<const Eigen::VectorXcd> x(v.amplitudes().data(), static_cast<Eigen::Index>(v.dim()));
  Eigen::VectorXcd c = q.adjoint() * x;
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] *= std::exp(cplx(0, -es.eigenvalues()[k] * t));
  Eigen::VectorXcd y = q * c;
  return StateVector(v.n_spins(), std::vector<cplx>(y.data(), y.data() + y.size()));
}

}  // namespace mesospin
