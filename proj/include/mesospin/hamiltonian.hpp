#pragma once

// Two-body spin Hamiltonians.
//
// Each operator is a list of diagonal sigma_z sigma_z terms plus flip terms
// that exchange a pair of spins (zero-quantum, bits differ) or flip both
// (double-quantum, bits equal). Off-diagonal values are real, so H is real
// symmetric. SparseOperator generates matrix elements from the term lists;
// SectorOperator stores one conserved block in compressed rows, with a 16-bit
// term id in place of each value so a 20-spin block stays within a few
// hundred MB.

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/lattice.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

/// Quantity the operator conserves; used to split the basis into blocks.
enum class Conserved { None, Magnetization, Parity };

struct ZZTerm {
  Bitmask mask;  // two bits
  double coeff;  // coefficient of sigma_z^i sigma_z^j
};

struct FlipTerm {
  Bitmask mask;
  double value;        // matrix element between the two connected basis states
  bool double_quantum;  // true: acts when the two bits agree; false: when they differ

  bool acts_on(Bitmask b) const {
    const Bitmask t = b & mask;
    return double_quantum ? (t == 0 || t == mask) : (t != 0 && t != mask);
  }
};

struct MatrixEntry {
  Bitmask row;
  Bitmask col;
  cplx value;
};

class SparseOperator {
 public:
  SparseOperator(int n, std::vector<ZZTerm> zz, std::vector<FlipTerm> flips, Conserved conserved)
      : n_(n), zz_(std::move(zz)), flips_(std::move(flips)), conserved_(conserved) {
    check_spin_count(n, "SparseOperator");
  }

  int n_spins() const { return n_; }
  std::size_t dim() const { return basis_dim(n_); }
  Conserved conserved() const { return conserved_; }
  const std::vector<ZZTerm>& zz_terms() const { return zz_; }
  const std::vector<FlipTerm>& flip_terms() const { return flips_; }

  double diagonal(Bitmask b) const {
    double d = 0.0;
    for (const auto& t : zz_) {
      const Bitmask x = b & t.mask;
      d += (x == 0 || x == t.mask) ? t.coeff : -t.coeff;
    }
    return d;
  }

  /// Calls f(col, value) for every off-diagonal element in row b.
  template <class F>
  void for_each_offdiagonal(Bitmask b, F&& f) const {
    for (const auto& t : flips_)
      if (t.acts_on(b)) f(b ^ t.mask, t.value);
  }

  /// out = H in over the full 2^n space.
  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != dim() || out.size() != dim())
      throw std::invalid_argument("SparseOperator::apply: dimension mismatch");
    for (std::size_t r = 0; r < in.size(); ++r) {
      const auto b = static_cast<Bitmask>(r);
      cplx acc = diagonal(b) * in[r];
      for_each_offdiagonal(b, [&](Bitmask c, double v) { acc += v * in[c]; });
      out[r] = acc;
    }
  }

  StateVector apply(const StateVector& v) const {
    if (v.n_spins() != n_) throw std::invalid_argument("SparseOperator::apply: register mismatch");
    StateVector out(n_);
    apply(v.amplitudes(), out.amplitudes());
    return out;
  }

  /// Upper-triangle entries (row <= col); the lower triangle is implied.
  std::vector<MatrixEntry> entries() const {
    std::vector<MatrixEntry> out;
    for (std::size_t r = 0; r < dim(); ++r) {
      const auto b = static_cast<Bitmask>(r);
      const double d = diagonal(b);
      if (d != 0.0) out.push_back({b, b, d});
      for_each_offdiagonal(b, [&](Bitmask c, double v) {
        if (c > b) out.push_back({b, c, v});
      });
    }
    return out;
  }

  std::size_t nonzeros() const {
    std::size_t count = 0;
    for (const auto& e : entries()) count += e.row == e.col ? 1 : 2;
    return count;
  }

  SparseOperator operator-() const {
    SparseOperator out = *this;
    for (auto& t : out.zz_) t.coeff = -t.coeff;
    for (auto& t : out.flips_) t.value = -t.value;
    return out;
  }

  SparseOperator scaled(double s) const {
    SparseOperator out = *this;
    for (auto& t : out.zz_) t.coeff *= s;
    for (auto& t : out.flips_) t.value *= s;
    return out;
  }

  /// Label of the conserved sector containing basis state b.
  int sector_label(Bitmask b) const {
    switch (conserved_) {
      case Conserved::Magnetization:
        return popcount(b);
      case Conserved::Parity:
        return popcount(b) & 1;
      case Conserved::None:
        break;
    }
    return 0;
  }

  int sector_count() const {
    switch (conserved_) {
      case Conserved::Magnetization:
        return n_ + 1;
      case Conserved::Parity:
        return 2;
      case Conserved::None:
        break;
    }
    return 1;
  }

 private:
  int n_;
  std::vector<ZZTerm> zz_;
  std::vector<FlipTerm> flips_;
  Conserved conserved_;
};

inline Bitmask pair_mask(int i, int j) { return (Bitmask{1} << i) | (Bitmask{1} << j); }

/// sum d_ij (2 sz sz - sx sx - sy sy)
inline SparseOperator build_dipolar(const Lattice& lattice) {
  std::vector<ZZTerm> zz;
  std::vector<FlipTerm> flips;
  for (const auto& c : lattice.couplings().entries()) {
    zz.push_back({pair_mask(c.i, c.j), 2.0 * c.strength});
    // sx sx + sy sy = 2 (s+ s- + s- s+)
    flips.push_back({pair_mask(c.i, c.j), -2.0 * c.strength, false});
  }
  return SparseOperator(lattice.n_spins(), std::move(zz), std::move(flips), Conserved::Magnetization);
}

/// sum a_ij (s+ s- + s- s+), the zero-quantum flip-flop Hamiltonian.
inline SparseOperator build_xy(const Lattice& lattice) {
  std::vector<FlipTerm> flips;
  for (const auto& c : lattice.couplings().entries())
    flips.push_back({pair_mask(c.i, c.j), c.strength, false});
  return SparseOperator(lattice.n_spins(), {}, std::move(flips), Conserved::Magnetization);
}

/// sum a_ij (s+ s+ + s- s-), the double-quantum grade-raising Hamiltonian.
inline SparseOperator build_grade_raising(const Lattice& lattice) {
  std::vector<FlipTerm> flips;
  for (const auto& c : lattice.couplings().entries())
    flips.push_back({pair_mask(c.i, c.j), c.strength, true});
  return SparseOperator(lattice.n_spins(), {}, std::move(flips), Conserved::Parity);
}

/// Debug dump as "row,col,re,im" (upper triangle).
inline void write_operator_csv(std::ostream& os, const SparseOperator& h) {
  os << "row,col,re,im\n";
  os.precision(17);
  for (const auto& e : h.entries())
    os << e.row << "," << e.col << "," << e.value.real() << "," << e.value.imag() << "\n";
}

/// The basis split into the blocks of a conserved quantity, with the index of
/// each basis state inside its own block.
class SectorMap {
 public:
  explicit SectorMap(const SparseOperator& h) : n_(h.n_spins()) {
    states_.resize(static_cast<std::size_t>(h.sector_count()));
    index_.resize(basis_dim(n_));
    for (std::size_t b = 0; b < basis_dim(n_); ++b) {
      auto& block = states_[static_cast<std::size_t>(h.sector_label(Bitmask(b)))];
      index_[b] = static_cast<std::uint32_t>(block.size());
      block.push_back(Bitmask(b));
    }
  }

  int n_spins() const { return n_; }
  int sector_count() const { return static_cast<int>(states_.size()); }
  std::span<const Bitmask> states(int sector) const { return states_[static_cast<std::size_t>(sector)]; }
  std::uint32_t index_in_sector(Bitmask b) const { return index_[b]; }

 private:
  int n_;
  std::vector<std::vector<Bitmask>> states_;
  std::vector<std::uint32_t> index_;
};

/// H restricted to one conserved block, acting on block-local coordinates.
class SectorOperator {
 public:
  SectorOperator(const SparseOperator& h, const SectorMap& map, int sector) {
    const auto states = map.states(sector);
    const auto& flips = h.flip_terms();
    if (flips.size() > 0xffff) throw std::invalid_argument("SectorOperator: too many flip terms");
    values_.reserve(flips.size());
    for (const auto& t : flips) values_.push_back(t.value);
    diag_.resize(states.size());
    row_.reserve(states.size() + 1);
    row_.push_back(0);
    for (std::size_t r = 0; r < states.size(); ++r) {
      const Bitmask b = states[r];
      diag_[r] = h.diagonal(b);
      for (std::size_t k = 0; k < flips.size(); ++k)
        if (flips[k].acts_on(b)) {
          col_.push_back(map.index_in_sector(b ^ flips[k].mask));
          term_.push_back(static_cast<std::uint16_t>(k));
        }
      row_.push_back(col_.size());
    }
    col_.shrink_to_fit();
    term_.shrink_to_fit();
  }

  std::size_t dim() const { return diag_.size(); }
  std::size_t nonzeros() const { return col_.size() + diag_.size(); }

  void apply(std::span<const cplx> in, std::span<cplx> out) const {
    const std::uint32_t* col = col_.data();
    const std::uint16_t* term = term_.data();
    const double* val = values_.data();
    for (std::size_t r = 0; r < diag_.size(); ++r) {
      double re = diag_[r] * in[r].real(), im = diag_[r] * in[r].imag();
      for (std::size_t e = row_[r]; e < row_[r + 1]; ++e) {
        const double v = val[term[e]];
        const cplx x = in[col[e]];
        re += v * x.real();
        im += v * x.imag();
      }
      out[r] = cplx(re, im);
    }
  }

 private:
  std::vector<double> diag_;
  std::vector<std::size_t> row_;
  std::vector<std::uint32_t> col_;
  std::vector<std::uint16_t> term_;
  std::vector<double> values_;
};

/// H over the whole 2^n space.
class FullOperator {
 public:
  explicit FullOperator(const SparseOperator& h) : h_(&h) {}
  std::size_t dim() const { return h_->dim(); }
  void apply(std::span<const cplx> in, std::span<cplx> out) const { h_->apply(in, out); }

 private:
  const SparseOperator* h_;
};

}  // namespace mesospin
