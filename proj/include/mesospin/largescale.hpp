#pragma once

// Binomial extrapolation of the grade-raising pipeline beyond exact reach.
// Branch 0 of each half is the initial mixture, whose spectrum is
// binomial(n_half, eps/2) in the down count; psi_1 is modelled by the
// spectrum of the identity state, binomial(n_half, 1/2). Both are fed to the
// same spectral kernels the exact pipeline uses.

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mesospin/measurement.hpp"
#include "mesospin/spectra.hpp"

namespace mesospin {

struct BinomialModel {
  int n_half;
  double eps;

  Spectrum p0() const { return binomial_spectrum(n_half, eps / 2.0); }
  Spectrum p1() const { return binomial_spectrum(n_half, 0.5); }
};

struct Extrapolation {
  int n_total;
  double eps;
  double slope;
  double population;
  double coherence_rel;
  double fidelity;
  double p_select;
};

/// 2 pi / (N (1 - eps)); undefined at eps = 1.
inline double auto_theta_slope(int n_total, double eps) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw std::invalid_argument("theta slope 'auto' is undefined at eps = 1; give an explicit slope");
  return 2.0 * std::numbers::pi / (n_total * (1.0 - eps));
}

inline Extrapolation extrapolate_fidelity(int n_total, double eps, std::optional<double> theta_slope = std::nullopt) {
  if (n_total < 8 || n_total % 2 != 0) throw std::invalid_argument("extrapolate_fidelity: N must be even and >= 8");
  if (n_total / 2 > 4096) throw std::invalid_argument("extrapolate_fidelity: N too large");
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("extrapolate_fidelity: eps outside [0, 1]");
  const double slope = theta_slope ? *theta_slope : auto_theta_slope(n_total, eps);
  const BinomialModel model{n_total / 2, eps};
  const auto out = spectral_outcome(model.p0(), model.p1(), PhasePOVM::with_slope(n_total, slope));
  return {n_total, eps, slope, out.population, out.coherence_rel, out.c0101 + out.c0110, out.p_select};
}

struct PopulationPoint {
  int n_total;
  double eps;
  double population;
};

inline std::vector<PopulationPoint> population_surface(const std::vector<int>& n_grid, const std::vector<double>& eps_grid,
                                                       std::optional<double> theta_slope = std::nullopt) {
  std::vector<PopulationPoint> out;
  for (int n : n_grid)
    for (double e : eps_grid) out.push_back({n, e, extrapolate_fidelity(n, e, theta_slope).population});
  return out;
}

}  // namespace mesospin
