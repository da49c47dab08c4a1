#pragma once

// Pure states in the computational basis, conditional branch pairs and
// diagonal mixtures.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesospin/core.hpp"

namespace mesospin {

class StateVector {
 public:
  StateVector() = default;

  /// Zero vector over n spins.
  explicit StateVector(int n) : n_(n) {
    check_spin_count(n, "StateVector");
    amps_.assign(basis_dim(n), cplx{});
  }

  StateVector(int n, std::vector<cplx> amps) : n_(n), amps_(std::move(amps)) {
    check_spin_count(n, "StateVector");
    if (amps_.size() != basis_dim(n))
      throw std::invalid_argument("StateVector: amplitude count does not match 2^n");
  }

  static StateVector basis(int n, Bitmask b) {
    StateVector v(n);
    if (b >= v.dim()) throw std::out_of_range("StateVector::basis: bitmask out of range");
    v.amps_[b] = 1.0;
    return v;
  }

  int n_spins() const { return n_; }
  std::size_t dim() const { return amps_.size(); }

  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }

  const cplx& operator[](Bitmask b) const { return amps_[b]; }
  cplx& operator[](Bitmask b) { return amps_[b]; }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
  }
  double norm() const { return std::sqrt(norm_squared()); }
  bool is_normalized(double tol = 1e-10) const { return std::abs(norm() - 1.0) <= tol; }

  StateVector& operator*=(cplx s) {
    for (auto& a : amps_) a *= s;
    return *this;
  }

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  int n_ = 0;
  std::vector<cplx> amps_;
};

inline void require_same_register(const StateVector& a, const StateVector& b, const char* what) {
  if (a.n_spins() != b.n_spins())
    throw std::invalid_argument(std::string(what) + ": states live on different registers");
}

/// <a|b>
inline cplx inner(const StateVector& a, const StateVector& b) {
  require_same_register(a, b, "inner");
  cplx s{};
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[Bitmask(i)]) * b[Bitmask(i)];
  return s;
}

inline double distance(const StateVector& a, const StateVector& b) {
  require_same_register(a, b, "distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::norm(a[Bitmask(i)] - b[Bitmask(i)]);
  return std::sqrt(s);
}

/// a on the low bits, b on the high bits.
inline StateVector tensor(const StateVector& a, const StateVector& b) {
  const int n = a.n_spins() + b.n_spins();
  StateVector out(n);
  for (std::size_t j = 0; j < b.dim(); ++j) {
    const cplx bj = b[Bitmask(j)];
    if (bj == cplx{}) continue;
    for (std::size_t i = 0; i < a.dim(); ++i)
      out[Bitmask((j << a.n_spins()) | i)] = a[Bitmask(i)] * bj;
  }
  return out;
}

/// sigma_x on one spin.
inline StateVector flip_spin(const StateVector& v, int spin) {
  if (spin < 0 || spin >= v.n_spins()) throw std::out_of_range("flip_spin: spin index");
  StateVector out(v.n_spins());
  const Bitmask m = Bitmask{1} << spin;
  for (std::size_t i = 0; i < v.dim(); ++i) out[Bitmask(i) ^ m] = v[Bitmask(i)];
  return out;
}

inline StateVector polarized_state(int n) {
  check_spin_count(n, "polarized_state");
  return StateVector::basis(n, 0);
}

/// Symmetric state with k spins down.
inline StateVector dicke_state(int n, int k) {
  check_spin_count(n, "dicke_state");
  if (k < 0 || k > n) throw std::out_of_range("dicke_state: k outside [0, n]");
  StateVector v(n);
  const double amp = 1.0 / std::sqrt(binomial(n, k));
  for_each_with_popcount(n, k, [&](Bitmask b) { v[b] = amp; });
  return v;
}

/// Qubit-controlled pair (|0>|psi0> + |1>|psi1>)/sqrt(2) over one MSS register.
struct BranchState {
  StateVector psi0;
  StateVector psi1;

  int n_spins() const { return psi0.n_spins(); }

  void validate(double tol = 1e-9) const {
    require_same_register(psi0, psi1, "BranchState");
    if (!psi0.is_normalized(tol) || !psi1.is_normalized(tol))
      throw std::invalid_argument("BranchState: branches must be normalized");
  }

  /// Joint qubit+MSS vector with the MSS on bits [0, n) and the qubit on bit n.
  StateVector joint() const {
    const int n = n_spins();
    StateVector out(n + 1);
    const double h = 1.0 / std::sqrt(2.0);
    for (std::size_t i = 0; i < psi0.dim(); ++i) {
      out[Bitmask(i)] = h * psi0[Bitmask(i)];
      out[Bitmask(i | (std::size_t{1} << n))] = h * psi1[Bitmask(i)];
    }
    return out;
  }
};

struct MixtureTerm {
  Bitmask bitmask;
  double probability;
};

/// Diagonal density operator sum_b p_b |b><b|, possibly truncated.
struct DiagonalMixture {
  int n_spins = 0;
  std::vector<MixtureTerm> terms;
  /// Probability removed by truncation before renormalization.
  double discarded_mass = 0.0;

  double total() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.probability;
    return s;
  }
};

inline constexpr double kMixtureKeepMass = 1.0 - 1e-6;

/// ((1 - eps/2)|up><up| + eps/2 |down><down|)^{(x) n}, keeping the most probable
/// basis states until the kept mass reaches 1 - 1e-6, then renormalizing.
/// Ties are broken by increasing bitmask.
inline DiagonalMixture mixed_polarized(int n, double eps, double keep_mass = kMixtureKeepMass) {
  check_spin_count(n, "mixed_polarized");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("mixed_polarized: eps outside [0, 1]");
  const double p_up = 1.0 - eps / 2.0;
  const double p_down = eps / 2.0;
  DiagonalMixture mix{n, {}, 0.0};

  std::vector<int> order(n + 1);
  for (int k = 0; k <= n; ++k) order[k] = k;
  auto prob = [&](int k) { return std::pow(p_up, n - k) * std::pow(p_down, k); };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return prob(a) > prob(b); });

  double kept = 0.0;
  for (int k : order) {
    const double p = prob(k);
    if (p <= 0.0 || kept >= keep_mass) break;
    bool done = false;
    for_each_with_popcount(n, k, [&](Bitmask b) {
      if (done) return;
      mix.terms.push_back({b, p});
      kept += p;
      if (kept >= keep_mass) done = true;
    });
  }
  mix.discarded_mass = std::max(0.0, 1.0 - kept);
  for (auto& t : mix.terms) t.probability /= kept;
  return mix;
}

/// CSV dump: "# n_spins=<n>" then "bitmask,re,im" rows for nonzero amplitudes.
inline void write_state_csv(std::ostream& os, const StateVector& v, double threshold = 0.0) {
  os << "# n_spins=" << v.n_spins() << "\n";
  os << "bitmask,re,im\n";
  os.precision(17);
  for (std::size_t i = 0; i < v.dim(); ++i) {
    const cplx a = v[Bitmask(i)];
    if (std::abs(a) > threshold || (threshold == 0.0 && a != cplx{}))
      os << i << "," << a.real() << "," << a.imag() << "\n";
  }
}

inline StateVector read_state_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# n_spins=", 0) != 0)
    throw std::invalid_argument("read_state_csv: missing '# n_spins=' header");
  const int n = std::stoi(line.substr(10));
  StateVector v(n);
  if (!std::getline(is, line)) throw std::invalid_argument("read_state_csv: missing column header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f0, f1, f2;
    std::getline(row, f0, ',');
    std::getline(row, f1, ',');
    std::getline(row, f2, ',');
    const auto b = static_cast<std::size_t>(std::stoull(f0));
    if (b >= v.dim()) throw std::out_of_range("read_state_csv: bitmask out of range");
    v[Bitmask(b)] = cplx(std::stod(f1), std::stod(f2));
  }
  return v;
}

}  // namespace mesospin
