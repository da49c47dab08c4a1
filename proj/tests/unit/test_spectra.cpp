#include <catch_amalgamated.hpp>

#include <sstream>

#include "helpers.hpp"

using namespace mesospin;
using Catch::Approx;

TEST_CASE("spectra of special states") {
  CHECK(spectrum_of(polarized_state(12)).at_m(6.0) == 1.0);
  CHECK(spectrum_of(dicke_state(12, 6)).at_m(0.0) == Approx(1.0).epsilon(1e-12));
  const double h = 1.0 / std::sqrt(2.0);
  auto ghz = spectrum_of(StateVector(2, {h, 0.0, 0.0, h}));
  CHECK(ghz.at_m(1.0) == Approx(0.5));
  CHECK(ghz.at_m(-1.0) == Approx(0.5));
  CHECK(ghz.at_m(0.0) == 0.0);
}

TEST_CASE("spectrum equals dense projector expectation") {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 8; ++n) {
    auto v = testing_util::random_state(n, rng);
    auto s = spectrum_of(v);
    for (int k = 0; k <= n; ++k) {
      DenseMatrix pi = DenseMatrix::Zero(v.dim(), v.dim());
      for (std::size_t b = 0; b < v.dim(); ++b)
        if (popcount(Bitmask(b)) == k) pi(b, b) = 1.0;
      Eigen::Map<const Eigen::VectorXcd> x(v.amplitudes().data(), v.dim());
      const double p = (x.adjoint() * pi * x)(0, 0).real();
      CHECK(std::abs(p - s[k]) < 1e-14);
    }
  }
}

TEST_CASE("moments") {
  auto d = moments(Spectrum::delta(12, 6.0));
  CHECK(d.mean == 6.0);
  CHECK(d.sd == 0.0);

  auto b = moments(binomial_spectrum(12, 0.5));
  CHECK(std::abs(b.mean) < 1e-12);
  CHECK(b.sd == Approx(std::sqrt(12.0) / 2).epsilon(1e-12));

  // rho_in(12, 0.2): each spin down with probability 0.1
  auto m = mixed_polarized(12, 0.2, 1.0);
  std::map<Bitmask, Spectrum> untouched;
  for (auto& t : m.terms) untouched.emplace(t.bitmask, spectrum_of(StateVector::basis(12, t.bitmask)));
  auto r = moments(spectrum_of_mixture(m, untouched));
  CHECK(r.mean == Approx(4.8).epsilon(1e-12));
  CHECK(r.sd == Approx(std::sqrt(12 * 0.1 * 0.9)).epsilon(1e-12));
  CHECK(r.sd == Approx(1.0392).margin(1e-4));

  CHECK_THROWS(moments(Spectrum(4)));
}

TEST_CASE("mixture spectrum with eps = 0 is the single evolved spectrum") {
  auto m = mixed_polarized(6, 0.0);
  auto s = spectrum_of(dicke_state(6, 2));
  std::map<Bitmask, Spectrum> ev{{0u, s}};
  auto r = spectrum_of_mixture(m, ev);
  for (int k = 0; k <= 6; ++k) CHECK(r[k] == s[k]);
  std::map<Bitmask, Spectrum> empty;
  CHECK_THROWS(spectrum_of_mixture(m, empty));
}

TEST_CASE("untouched mixture is a shifted binomial") {
  const double eps = 0.3;
  auto m = mixed_polarized(10, eps, 1.0);
  std::map<Bitmask, Spectrum> ev;
  for (auto& t : m.terms) ev.emplace(t.bitmask, spectrum_of(StateVector::basis(10, t.bitmask)));
  auto s = spectrum_of_mixture(m, ev);
  auto b = binomial_spectrum(10, eps / 2);
  for (int k = 0; k <= 10; ++k) CHECK(s[k] == Approx(b[k]).margin(1e-14));
  CHECK(moments(s).mean == Approx((1 - eps) * 10 / 2));
}

TEST_CASE("convolution") {
  auto c = convolve(Spectrum::delta(4, 1.0), Spectrum::delta(6, -2.0));
  CHECK(c.n_spins() == 10);
  CHECK(c.at_m(-1.0) == 1.0);

  std::mt19937_64 rng(5);
  auto s = spectrum_of(testing_util::random_state(7, rng));
  auto ss = convolve(s, s);
  CHECK(moments(ss).mean == Approx(2 * moments(s).mean).margin(1e-10));
  CHECK(moments(ss).sd == Approx(std::sqrt(2.0) * moments(s).sd).margin(1e-10));

  auto ghz = convolve(Spectrum::delta(12, 6.0), Spectrum::delta(12, 6.0));
  CHECK(ghz.at_m(12.0) == 1.0);
}

TEST_CASE("tensor product spectrum is the convolution") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 5; ++rep) {
    auto v = testing_util::random_state(3 + rep % 3, rng);
    auto w = testing_util::random_state(2 + rep % 4, rng);
    auto a = spectrum_of(tensor(v, w));
    auto b = convolve(spectrum_of(v), spectrum_of(w));
    for (int k = 0; k <= a.n_spins(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
  }
}

TEST_CASE("distinctness ratio") {
  CHECK(distinctness_ratio(Spectrum::delta(12, 6.0), Spectrum::delta(12, 6.0)) == 0.0);
  CHECK(distinctness_ratio(Spectrum::delta(1, 0.5), Spectrum::delta(1, -0.5)) == 1.0);
  // delta at 8 vs mean 0, sd 2 on 16 spins
  auto b = binomial_spectrum(16, 0.5);
  REQUIRE(moments(b).sd == Approx(2.0));
  CHECK(distinctness_ratio(Spectrum::delta(16, 8.0), b) == Approx(4.0));
  CHECK(distinguishable(Spectrum::delta(16, 8.0), b));
  CHECK_FALSE(distinguishable(Spectrum::delta(1, 0.5), Spectrum::delta(1, -0.5)));
}

TEST_CASE("spectrum csv") {
  std::stringstream ss;
  write_spectrum_csv(ss, Spectrum::delta(2, 1.0), {{"protocol", "gr"}, {"t", "0"}});
  CHECK(ss.str() == "# n_spins=2,protocol=gr,t=0\nm_z,probability\n1,1\n0,0\n-1,0\n");
}

TEST_CASE("off-grid magnetization is rejected") {
  Spectrum s(3);
  CHECK_THROWS(s.at_m(1.0));
  CHECK_THROWS(s.at_m(2.5));
  CHECK_NOTHROW(s.at_m(-1.5));
}
