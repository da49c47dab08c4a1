#pragma once

// Spin geometries and pairwise coupling tables.
//
// Spins sit on an integer grid; index 0 is the corner (0, 0, ...) and acts as
// the contact spin touched by the external qubit. Couplings are in units of
// the nearest-neighbour strength, so evolution times are in units of 1/a_12.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesospin/core.hpp"

namespace mesospin {

enum class CouplingMode { FullDipolar, NearestNeighbor };

inline std::string to_string(CouplingMode m) {
  return m == CouplingMode::FullDipolar ? "dipolar" : "nn";
}

inline CouplingMode parse_coupling_mode(const std::string& s) {
  if (s == "dipolar" || s == "full" || s == "FullDipolar") return CouplingMode::FullDipolar;
  if (s == "nn" || s == "NearestNeighbor") return CouplingMode::NearestNeighbor;
  throw std::invalid_argument("unknown coupling mode '" + s + "' (expected dipolar|nn)");
}

struct Coupling {
  int i;
  int j;  // i < j
  double strength;
};

class CouplingTable {
 public:
  CouplingTable() = default;
  explicit CouplingTable(std::vector<Coupling> entries) : entries_(std::move(entries)) {}

  const std::vector<Coupling>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Coupling between i and j, 0 when the pair is not coupled.
  double at(int i, int j) const {
    if (i > j) std::swap(i, j);
    for (const auto& c : entries_)
      if (c.i == i && c.j == j) return c.strength;
    return 0.0;
  }

 private:
  std::vector<Coupling> entries_;
};

class Lattice {
 public:
  Lattice(std::vector<int> dims, CouplingMode mode, double spacing = 1.0)
      : dims_(std::move(dims)), spacing_(spacing), mode_(mode) {
    if (dims_.empty()) throw std::invalid_argument("lattice: dims must be nonempty");
    long total = 1;
    for (int d : dims_) {
      if (d < 1) throw std::invalid_argument("lattice: every dimension must be >= 1");
      total *= d;
      if (total > kMaxSpins)
        throw std::invalid_argument("lattice: more than " + std::to_string(kMaxSpins) +
                                    " spins is beyond exact simulation");
    }
    if (!(spacing_ > 0.0)) throw std::invalid_argument("lattice: spacing must be positive");
    n_ = static_cast<int>(total);
    build_couplings();
  }

  int n_spins() const { return n_; }
  const std::vector<int>& dims() const { return dims_; }
  double spacing() const { return spacing_; }
  CouplingMode coupling_mode() const { return mode_; }
  int contact_spin() const { return 0; }
  const CouplingTable& couplings() const { return couplings_; }

  /// Grid coordinates of spin `index`; the first dimension varies fastest.
  std::vector<int> coordinates(int index) const {
    std::vector<int> c(dims_.size());
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      c[d] = index % dims_[d];
      index /= dims_[d];
    }
    return c;
  }

  std::string describe() const {
    std::string s;
    for (std::size_t d = 0; d < dims_.size(); ++d) s += (d ? "x" : "") + std::to_string(dims_[d]);
    return s + "/" + to_string(mode_);
  }

 private:
  void build_couplings() {
    std::vector<Coupling> out;
    for (int i = 0; i < n_; ++i) {
      const auto ci = coordinates(i);
      for (int j = i + 1; j < n_; ++j) {
        const auto cj = coordinates(j);
        int manhattan = 0;
        double r2 = 0.0;
        for (std::size_t d = 0; d < dims_.size(); ++d) {
          const int delta = ci[d] - cj[d];
          manhattan += std::abs(delta);
          r2 += double(delta) * delta;
        }
        if (mode_ == CouplingMode::NearestNeighbor) {
          if (manhattan == 1) out.push_back({i, j, 1.0});
        } else {
          // a_ij = (spacing / |r_ij|)^3 with |r_ij| = spacing * grid distance
          out.push_back({i, j, 1.0 / (r2 * std::sqrt(r2))});
        }
      }
    }
    couplings_ = CouplingTable(std::move(out));
  }

  std::vector<int> dims_;
  double spacing_;
  CouplingMode mode_;
  int n_ = 0;
  CouplingTable couplings_;
};

inline Lattice build_lattice(std::vector<int> dims, CouplingMode mode) {
  return Lattice(std::move(dims), mode);
}

}  // namespace mesospin
