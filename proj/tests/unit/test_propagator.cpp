#include <catch_amalgamated.hpp>

#include <numbers>

#include "helpers.hpp"

using namespace mesospin;
using Catch::Approx;
using testing_util::max_abs_diff;
using testing_util::random_state;

TEST_CASE("two-spin flip-flop Rabi solution") {
  auto h = build_xy(Lattice({2}, CouplingMode::FullDipolar));
  const double t = std::numbers::pi / 2;
  auto w = evolve(h, t, StateVector::basis(2, 0b10));
  CHECK(std::abs(w[0b10]) < 1e-12);
  CHECK(std::abs(w[0b01] - cplx(0, -1)) < 1e-10);

  const double t2 = 0.7;
  auto u = evolve(h, t2, StateVector::basis(2, 0b10));
  CHECK(std::abs(u[0b10] - std::cos(t2)) < 1e-10);
  CHECK(std::abs(u[0b01] - cplx(0, -std::sin(t2))) < 1e-10);
}

TEST_CASE("zero time is the identity") {
  std::mt19937_64 rng(1);
  auto h = build_dipolar(Lattice({5}, CouplingMode::FullDipolar));
  auto v = random_state(5, rng);
  CHECK(evolve(h, 0.0, v) == v);
}

TEST_CASE("forward then backward returns the input") {
  std::mt19937_64 rng(2);
  Lattice l({2, 4}, CouplingMode::FullDipolar);
  for (const auto& h : {build_dipolar(l), build_xy(l), build_grade_raising(l)}) {
    auto v = random_state(8, rng);
    auto w = evolve(h, 5.3, evolve(h, -5.3, v));
    CHECK(distance(w, v) < 1e-8);
  }
}

TEST_CASE("norm is preserved") {
  std::mt19937_64 rng(3);
  auto h = build_grade_raising(Lattice({10}, CouplingMode::FullDipolar));
  auto v = random_state(10, rng);
  CHECK(std::abs(evolve(h, 20.0, v).norm() - 1.0) < 1e-9);
}

TEST_CASE("dense oracle agrees with Krylov evolution") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> tdist(-6.0, 6.0);
  double worst = 0.0;
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 2 + rep % 7;
    Lattice l({n}, rep % 2 ? CouplingMode::FullDipolar : CouplingMode::NearestNeighbor);
    const auto h = rep % 3 == 0 ? build_dipolar(l) : rep % 3 == 1 ? build_xy(l) : build_grade_raising(l);
    const double t = tdist(rng);
    auto v = random_state(n, rng);
    worst = std::max(worst, distance(evolve(h, t, v), evolve_dense_oracle(h, t, v)));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("dense oracle: diagonal H rotates phases; t and -t cancel") {
  std::mt19937_64 rng(9);
  SparseOperator h(3, {{0b011, 0.7}, {0b110, -0.4}}, {}, Conserved::Magnetization);
  auto v = random_state(3, rng);
  const double t = 1.3;
  auto w = evolve_dense_oracle(h, t, v);
  for (std::size_t b = 0; b < v.dim(); ++b)
    CHECK(std::abs(w[Bitmask(b)] - std::exp(cplx(0, -h.diagonal(Bitmask(b)) * t)) * v[Bitmask(b)]) < 1e-12);
  auto h2 = build_dipolar(Lattice({4}, CouplingMode::FullDipolar));
  auto u = random_state(4, rng);
  CHECK(distance(evolve_dense_oracle(h2, -t, evolve_dense_oracle(h2, t, u)), u) < 1e-10);
  CHECK_THROWS(evolve_dense_oracle(build_xy(Lattice({11}, CouplingMode::NearestNeighbor)), 1.0,
                                   polarized_state(11)));
}

TEST_CASE("sector evolution matches full-space evolution") {
  std::mt19937_64 rng(13);
  Lattice l({3, 3}, CouplingMode::FullDipolar);
  for (const auto& h : {build_dipolar(l), build_grade_raising(l)}) {
    Propagator p(h);
    auto v = random_state(9, rng);
    auto a = p.evolve(4.1, v).state;
    auto b = p.evolve_full_space(4.1, v).state;
    CHECK(max_abs_diff(a, b) < 1e-10);
  }
}

TEST_CASE("magnetization spectrum is invariant under XY and dipolar evolution") {
  std::mt19937_64 rng(17);
  Lattice l({8}, CouplingMode::FullDipolar);
  auto v = random_state(8, rng);
  for (const auto& h : {build_dipolar(l), build_xy(l)}) {
    auto s0 = spectrum_of(v);
    auto s1 = spectrum_of(evolve(h, 9.0, v));
    double tv = 0.0;
    for (int k = 0; k <= 8; ++k) tv += 0.5 * std::abs(s0[k] - s1[k]);
    CHECK(tv < 1e-10);
  }
}

TEST_CASE("error estimate is reported and bounded") {
  std::mt19937_64 rng(23);
  auto h = build_grade_raising(Lattice({8}, CouplingMode::FullDipolar));
  Propagator p(h);
  auto r = p.evolve(30.0, random_state(8, rng));
  CHECK(r.report.substeps > 0);
  CHECK(r.report.matvecs > 0);
  CHECK(r.report.error_estimate <= p.config().tol * r.report.substeps);
}

TEST_CASE("substep budget exhaustion is an explicit failure") {
  std::mt19937_64 rng(29);
  auto h = build_grade_raising(Lattice({8}, CouplingMode::FullDipolar));
  PropagatorConfig cfg;
  cfg.krylov_dim = 4;
  cfg.max_substeps = 2;
  CHECK_THROWS_AS(evolve(h, 50.0, random_state(8, rng), cfg), PropagationError);
}

TEST_CASE("invalid configurations and inputs") {
  PropagatorConfig cfg;
  cfg.krylov_dim = 1;
  CHECK_THROWS(cfg.validate());
  cfg.krylov_dim = 30;
  cfg.tol = 0.0;
  CHECK_THROWS(cfg.validate());
  auto h = build_xy(Lattice({3}, CouplingMode::FullDipolar));
  CHECK_THROWS(evolve(h, 1.0, polarized_state(4)));
  CHECK_THROWS(evolve(h, std::numeric_limits<double>::infinity(), polarized_state(3)));
}

TEST_CASE("repeated evolution is bitwise deterministic") {
  std::mt19937_64 rng(31);
  auto h = build_grade_raising(Lattice({9}, CouplingMode::FullDipolar));
  auto v = random_state(9, rng);
  CHECK(evolve(h, 7.0, v) == evolve(h, 7.0, v));
}
