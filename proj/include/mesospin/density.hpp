#pragma once

// Dense density operators for small registers (n <= 11), with partial trace
// and partial transpose over arbitrary spin subsets.

#include <Eigen/Dense>

#include <algorithm>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

using DenseMatrix = Eigen::MatrixXcd;

inline constexpr int kMaxDenseSpins = 11;

class DensityOperator {
 public:
  DensityOperator() = default;

  DensityOperator(int n, DenseMatrix m) : n_(n), m_(std::move(m)) {
    if (n < 1 || n > kMaxDenseSpins)
      throw std::invalid_argument("DensityOperator: dense operators are limited to " +
                                  std::to_string(kMaxDenseSpins) + " spins");
    const auto d = static_cast<Eigen::Index>(basis_dim(n));
    if (m_.rows() != d || m_.cols() != d)
      throw std::invalid_argument("DensityOperator: matrix is not 2^n x 2^n");
  }

  static DensityOperator pure(const StateVector& v) {
    Eigen::Map<const Eigen::VectorXcd> x(v.amplitudes().data(), static_cast<Eigen::Index>(v.dim()));
    return DensityOperator(v.n_spins(), x * x.adjoint());
  }

  static DensityOperator from_mixture(const DiagonalMixture& mix) {
    const auto d = static_cast<Eigen::Index>(basis_dim(mix.n_spins));
    DenseMatrix m = DenseMatrix::Zero(d, d);
    for (const auto& t : mix.terms) m(t.bitmask, t.bitmask) += t.probability;
    return DensityOperator(mix.n_spins, std::move(m));
  }

  int n_spins() const { return n_; }
  const DenseMatrix& matrix() const { return m_; }
  DenseMatrix& matrix() { return m_; }

  cplx trace() const { return m_.trace(); }

  double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  /// Checks trace 1, Hermiticity and eigenvalues >= -1e-9.
  bool is_valid(double tol = 1e-10) const {
    if (std::abs(trace() - 1.0) > tol || hermiticity_error() > tol) return false;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -1e-9;
  }

 private:
  int n_ = 0;
  DenseMatrix m_;
};

/// a on the low bits, b on the high bits (matches tensor() for states).
inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  const int n = a.n_spins() + b.n_spins();
  const auto da = a.matrix().rows();
  const auto db = b.matrix().rows();
  DenseMatrix m(da * db, da * db);
  for (Eigen::Index r = 0; r < db; ++r)
    for (Eigen::Index c = 0; c < db; ++c) m.block(r * da, c * da, da, da) = b.matrix()(r, c) * a.matrix();
  return DensityOperator(n, std::move(m));
}

namespace detail {

inline std::vector<int> checked_subset(std::span<const int> idx, int n, const char* what) {
  std::set<int> seen;
  for (int i : idx) {
    if (i < 0 || i >= n || !seen.insert(i).second)
      throw std::invalid_argument(std::string(what) + ": invalid spin index set");
  }
  return {seen.begin(), seen.end()};
}

/// Packs the bits of b at positions `idx` into a compact integer.
inline std::size_t gather_bits(std::size_t b, const std::vector<int>& idx) {
  std::size_t out = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) out |= ((b >> idx[k]) & 1u) << k;
  return out;
}

}  // namespace detail

/// Reduced operator on the spins in `keep`, relabelled 0..|keep|-1 in
/// increasing index order.
inline DensityOperator partial_trace(const DensityOperator& rho, std::span<const int> keep) {
  const int n = rho.n_spins();
  const auto kept = detail::checked_subset(keep, n, "partial_trace");
  if (kept.empty()) throw std::invalid_argument("partial_trace: keep set is empty");
  std::vector<int> traced;
  for (int i = 0; i < n; ++i)
    if (!std::binary_search(kept.begin(), kept.end(), i)) traced.push_back(i);

  const auto dk = static_cast<Eigen::Index>(basis_dim(static_cast<int>(kept.size())));
  DenseMatrix out = DenseMatrix::Zero(dk, dk);
  const std::size_t d = basis_dim(n);
  for (std::size_t r = 0; r < d; ++r) {
    const std::size_t env_r = detail::gather_bits(r, traced);
    const std::size_t kr = detail::gather_bits(r, kept);
    for (std::size_t c = 0; c < d; ++c) {
      if (detail::gather_bits(c, traced) != env_r) continue;
      out(static_cast<Eigen::Index>(kr), static_cast<Eigen::Index>(detail::gather_bits(c, kept))) +=
          rho.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return DensityOperator(static_cast<int>(kept.size()), std::move(out));
}

/// Transpose on the spins in `subsystem`; the result need not be positive.
inline DenseMatrix partial_transpose(const DenseMatrix& m, int n, std::span<const int> subsystem) {
  const auto sub = detail::checked_subset(subsystem, n, "partial_transpose");
  Bitmask mask = 0;
  for (int i : sub) mask |= Bitmask{1} << i;
  const auto d = static_cast<Eigen::Index>(basis_dim(n));
  DenseMatrix out(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      // swap the subsystem bits between row and column
      const auto rr = static_cast<Bitmask>(r), cc = static_cast<Bitmask>(c);
      const Bitmask r2 = (rr & ~mask) | (cc & mask);
      const Bitmask c2 = (cc & ~mask) | (rr & mask);
      out(r2, c2) = m(r, c);
    }
  }
  return out;
}

inline DenseMatrix partial_transpose(const DensityOperator& rho, std::span<const int> subsystem) {
  return partial_transpose(rho.matrix(), rho.n_spins(), subsystem);
}

}  // namespace mesospin
