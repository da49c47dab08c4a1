#pragma once

// Basic types, error classes and bit helpers shared by every module.
//
// Basis convention: spin i is bit i of a bitmask; a set bit is spin down.
// The magnetization of a basis state of n spins is (n - 2 popcount(b)) / 2.

#include <bit>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mesospin {

using cplx = std::complex<double>;
using Bitmask = std::uint32_t;

/// Largest register handled by any exact routine.
inline constexpr int kMaxSpins = 24;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Krylov propagation did not finish within its substep budget.
class PropagationError : public Error {
 public:
  using Error::Error;
};

/// Outcome-1 probability too small to normalize the post-selected state.
class PostSelectionError : public Error {
 public:
  using Error::Error;
};

inline int popcount(Bitmask b) { return std::popcount(b); }

inline std::size_t basis_dim(int n) { return std::size_t{1} << n; }

/// Magnetization in units of hbar for a basis state.
inline double magnetization(int n, Bitmask b) { return 0.5 * (n - 2 * popcount(b)); }

/// Magnetization of the sector with k down spins.
inline double magnetization_of_downs(int n, int k) { return 0.5 * (n - 2 * k); }

inline void check_spin_count(int n, const char* what) {
  if (n < 1 || n > kMaxSpins) {
    throw std::invalid_argument(std::string(what) + ": spin count " + std::to_string(n) +
                                " outside [1, " + std::to_string(kMaxSpins) + "]");
  }
}

/// Calls f(b) for every n-bit mask with popcount k, in increasing order.
template <class F>
void for_each_with_popcount(int n, int k, F&& f) {
  if (k < 0 || k > n) return;
  if (k == 0) {
    f(Bitmask{0});
    return;
  }
  const std::uint64_t limit = std::uint64_t{1} << n;
  for (std::uint64_t b = (std::uint64_t{1} << k) - 1; b < limit;) {
    f(static_cast<Bitmask>(b));
    const std::uint64_t c = b & (~b + 1);
    const std::uint64_t r = b + c;
    b = (((r ^ b) >> 2) / c) | r;
  }
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace mesospin
