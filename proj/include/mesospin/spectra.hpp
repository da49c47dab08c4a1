#pragma once

// Collective-magnetization spectra. Projectors onto J_z sectors are never
// built; a basis state's sector is its popcount.

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

/// P(m_z) over m_z = n/2 - k, stored by down-count k = 0..n.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(int n) : n_(n), p_(static_cast<std::size_t>(n) + 1, 0.0) {
    if (n < 0) throw std::invalid_argument("Spectrum: negative spin count");
  }
  Spectrum(int n, std::vector<double> by_downs) : n_(n), p_(std::move(by_downs)) {
    if (n < 0 || p_.size() != static_cast<std::size_t>(n) + 1)
      throw std::invalid_argument("Spectrum: need n+1 probabilities");
  }

  /// All mass at magnetization m.
  static Spectrum delta(int n, double m) {
    Spectrum s(n);
    s.at_m(m) = 1.0;
    return s;
  }

  int n_spins() const { return n_; }
  std::size_t size() const { return p_.size(); }
  const std::vector<double>& by_downs() const { return p_; }

  double m_of(int k) const { return magnetization_of_downs(n_, k); }
  double operator[](int k) const { return p_[static_cast<std::size_t>(k)]; }
  double& operator[](int k) { return p_[static_cast<std::size_t>(k)]; }

  /// Probability at magnetization m (must be on the lattice n/2 - k).
  double& at_m(double m) { return p_[index_of(m)]; }
  double at_m(double m) const { return p_[index_of(m)]; }

  double total() const {
    double s = 0.0;
    for (double x : p_) s += x;
    return s;
  }

  Spectrum normalized() const {
    const double z = total();
    if (!(z > 0.0)) throw std::invalid_argument("Spectrum::normalized: zero mass");
    Spectrum out = *this;
    for (auto& x : out.p_) x /= z;
    return out;
  }

 private:
  std::size_t index_of(double m) const {
    const double k = n_ / 2.0 - m;
    const long ki = std::lround(k);
    if (std::abs(k - double(ki)) > 1e-9 || ki < 0 || ki > n_)
      throw std::out_of_range("Spectrum: m_z not on the magnetization grid");
    return static_cast<std::size_t>(ki);
  }

  int n_ = 0;
  std::vector<double> p_;
};

inline Spectrum spectrum_of(const StateVector& v) {
  Spectrum s(v.n_spins());
  for (std::size_t b = 0; b < v.dim(); ++b) s[popcount(Bitmask(b))] += std::norm(v[Bitmask(b)]);
  return s;
}

/// Probability-weighted average of per-term spectra.
inline Spectrum spectrum_of_mixture(const DiagonalMixture& mix,
                                    const std::function<const Spectrum*(Bitmask)>& evolved) {
  Spectrum s(mix.n_spins);
  for (const auto& t : mix.terms) {
    const Spectrum* e = evolved(t.bitmask);
    if (!e) throw std::invalid_argument("spectrum_of_mixture: no evolved spectrum for bitmask " +
                                        std::to_string(t.bitmask));
    if (e->n_spins() != mix.n_spins) throw std::invalid_argument("spectrum_of_mixture: register mismatch");
    for (int k = 0; k <= mix.n_spins; ++k) s[k] += t.probability * (*e)[k];
  }
  return s;
}

inline Spectrum spectrum_of_mixture(const DiagonalMixture& mix, const std::map<Bitmask, Spectrum>& evolved) {
  return spectrum_of_mixture(mix, [&](Bitmask b) -> const Spectrum* {
    auto it = evolved.find(b);
    return it == evolved.end() ? nullptr : &it->second;
  });
}

struct Moments {
  double mean;
  double sd;
};

inline Moments moments(const Spectrum& s) {
  const double z = s.total();
  if (!(z > 0.0)) throw std::invalid_argument("moments: spectrum has zero mass");
  double m1 = 0.0;
  for (int k = 0; k <= s.n_spins(); ++k) m1 += s[k] * s.m_of(k);
  m1 /= z;
  double var = 0.0;
  for (int k = 0; k <= s.n_spins(); ++k) {
    const double d = s.m_of(k) - m1;
    var += s[k] * d * d;
  }
  return {m1, std::sqrt(std::max(0.0, var / z))};
}

/// Distribution of m_L + m_R.
inline Spectrum convolve(const Spectrum& a, const Spectrum& b) {
  Spectrum out(a.n_spins() + b.n_spins());
  for (int i = 0; i <= a.n_spins(); ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j <= b.n_spins(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Binomial spectrum with each of n spins down independently with probability p_down.
inline Spectrum binomial_spectrum(int n, double p_down) {
  if (!(p_down >= 0.0 && p_down <= 1.0)) throw std::invalid_argument("binomial_spectrum: p outside [0, 1]");
  Spectrum s(n);
  for (int k = 0; k <= n; ++k) s[k] = binomial(n, k) * std::pow(p_down, k) * std::pow(1.0 - p_down, n - k);
  return s;
}

/// |mean0 - mean1| / max(sd0 + sd1, 1), with hbar = 1.
inline double distinctness_ratio(const Spectrum& s0, const Spectrum& s1) {
  const auto a = moments(s0);
  const auto b = moments(s1);
  return std::abs(a.mean - b.mean) / std::max(a.sd + b.sd, 1.0);
}

/// Coefficient by which the mean separation must exceed the summed spreads
/// for the two branches to be told apart by one collective measurement.
inline constexpr double kDistinguishabilityCoefficient = 1.0 + std::numbers::sqrt2;

inline bool distinguishable(const Spectrum& s0, const Spectrum& s1) {
  return distinctness_ratio(s0, s1) > kDistinguishabilityCoefficient;
}

/// "# key=value,..." metadata line, then "m_z,probability".
inline void write_spectrum_csv(std::ostream& os, const Spectrum& s,
                               const std::vector<std::pair<std::string, std::string>>& meta = {}) {
  os << "# n_spins=" << s.n_spins();
  for (const auto& [k, v] : meta) os << "," << k << "=" << v;
  os << "\nm_z,probability\n";
  os.precision(17);
  for (int k = 0; k <= s.n_spins(); ++k) os << s.m_of(k) << "," << s[k] << "\n";
}

}  // namespace mesospin
