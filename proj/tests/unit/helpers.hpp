#pragma once

#include <random>

#include "mesospin/mesospin.hpp"

namespace testing_util {

using namespace mesospin;

inline StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector v(n);
  for (std::size_t i = 0; i < v.dim(); ++i) v[Bitmask(i)] = cplx(g(rng), g(rng));
  v *= 1.0 / v.norm();
  return v;
}

/// Random state restricted to basis states with the given popcount parity.
inline StateVector random_state_in_sector(int n, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector v(n);
  for_each_with_popcount(n, k, [&](Bitmask b) { v[b] = cplx(g(rng), g(rng)); });
  v *= 1.0 / v.norm();
  return v;
}

inline double max_abs_diff(const StateVector& a, const StateVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) m = std::max(m, std::abs(a[Bitmask(i)] - b[Bitmask(i)]));
  return m;
}

}  // namespace testing_util
