#include <catch_amalgamated.hpp>

#include <numbers>

#include "helpers.hpp"

using namespace mesospin;
using Catch::Approx;

constexpr double kPi = std::numbers::pi;

namespace {

/// rho_q by direct construction of the 2N_h-spin conditional vectors
/// chi_kj = (U_k^dag (x) U_j^dag) M_1 (psi_k (x) psi_j).
QubitDensityMatrix brute_force_rho(const PreparedHalf& L, const PreparedHalf& R, const PhasePOVM& povm,
                                   double* p_select = nullptr) {
  const int nl = L.branch.n_spins(), nr = R.branch.n_spins();
  std::array<StateVector, 4> chi;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j) {
      StateVector v = tensor(k ? L.branch.psi1 : L.branch.psi0, j ? R.branch.psi1 : R.branch.psi0);
      for (std::size_t b = 0; b < v.dim(); ++b)
        v[Bitmask(b)] *= cplx(0, std::sin(povm.theta(magnetization(nl + nr, Bitmask(b)))));
      const std::size_t dl = basis_dim(nl), dr = basis_dim(nr);
      for (std::size_t r = 0; r < dr; ++r) {
        StateVector slice(nl);
        for (std::size_t l = 0; l < dl; ++l) slice[Bitmask(l)] = v[Bitmask(r * dl + l)];
        slice = L.undo(k, slice);
        for (std::size_t l = 0; l < dl; ++l) v[Bitmask(r * dl + l)] = slice[Bitmask(l)];
      }
      for (std::size_t l = 0; l < dl; ++l) {
        StateVector slice(nr);
        for (std::size_t r = 0; r < dr; ++r) slice[Bitmask(r)] = v[Bitmask(r * dl + l)];
        slice = R.undo(j, slice);
        for (std::size_t r = 0; r < dr; ++r) v[Bitmask(r * dl + l)] = slice[Bitmask(r)];
      }
      chi[static_cast<std::size_t>(2 * k + j)] = v;
    }
  QubitDensityMatrix g;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) g(a, b) = 0.25 * inner(chi[static_cast<std::size_t>(b)], chi[static_cast<std::size_t>(a)]);
  const double p = g.trace().real();
  if (p_select) *p_select = p;
  return g / p;
}

PreparedHalf gr_half(const Lattice& l, double t, const StateVector& init) {
  return prepared(magnify_gr(l, t, init));
}

void check_valid(const JointOutcome& o) {
  const auto& r = o.rho_q;
  CHECK((r - r.adjoint()).norm() < 1e-12);
  CHECK(std::abs(r.trace() - 1.0) < 1e-10);
  Eigen::SelfAdjointEigenSolver<QubitDensityMatrix> es(r);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9);
  CHECK(o.c0110 <= o.c0101 + 1e-12);
}

}  // namespace

TEST_CASE("POVM completeness holds on every sector") {
  auto povm = PhasePOVM::linear(24);
  double worst = 0.0;
  for (int k = 0; k <= 24; ++k) worst = std::max(worst, std::abs(povm.e0(12.0 - k) + povm.e1(12.0 - k) - 1.0));
  CHECK(worst <= 2.3e-16);
}

TEST_CASE("povm_apply edge phases") {
  std::mt19937_64 rng(1);
  auto v = testing_util::random_state(4, rng);
  auto half = povm_apply(PhasePOVM::custom(4, [](double) { return kPi / 2; }), v);
  CHECK(half.weight == Approx(1.0).epsilon(1e-14));
  for (std::size_t b = 0; b < v.dim(); ++b) CHECK(std::abs(half.state[Bitmask(b)] - cplx(0, 1) * v[Bitmask(b)]) < 1e-15);

  CHECK(povm_apply(PhasePOVM::custom(4, [](double) { return 0.0; }), v).weight == 0.0);

  auto d = dicke_state(4, 1);  // m = 1
  auto q = povm_apply(PhasePOVM::custom(4, [](double m) { return m * kPi / 4; }), d);
  CHECK(q.weight == Approx(0.5).epsilon(1e-14));

  CHECK_THROWS(povm_apply(PhasePOVM::linear(6), v));
  CHECK_NOTHROW(povm_apply(PhasePOVM::linear(6), v, 1.0, 2));
}

TEST_CASE("weight equals sum of sin^2 theta over the spectrum") {
  std::mt19937_64 rng(2);
  auto v = testing_util::random_state(6, rng);
  auto povm = PhasePOVM::linear(10);
  const double shift = -1.0;
  auto s = spectrum_of(v);
  double w = 0.0;
  for (int k = 0; k <= 6; ++k) w += povm.e1(shift + s.m_of(k)) * s[k];
  CHECK(povm_apply(povm, v, shift, 4).weight == Approx(w).epsilon(1e-13));
}

TEST_CASE("apparatus model reproduces the POVM") {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 8; ++n) {
    auto v = testing_util::random_state(n, rng);
    auto povm = PhasePOVM::linear(n + 3, 0.1);
    const double shift = 0.5;
    auto a = povm_apply(povm, v, shift, 3);
    auto b = apparatus_outcome(povm, v, shift, 3);
    CHECK(std::abs(a.weight - b.weight) <= 1e-12);
    StateVector bi = b.state;
    bi *= cplx(0, 1);
    CHECK(testing_util::max_abs_diff(a.state, bi) <= 1e-12);
  }
}

TEST_CASE("ideal macroscopic branches give a perfect Bell state") {
  // psi1 flips half of each half's spins, so its spectrum is a delta at 0
  const int nh = 8;
  Bitmask flip = (Bitmask{1} << (nh / 2)) - 1;
  auto undo = [flip](int k, const StateVector& v) {
    if (k == 0) return v;
    StateVector out(v.n_spins());
    for (std::size_t b = 0; b < v.dim(); ++b) out[Bitmask(b) ^ flip] = v[Bitmask(b)];
    return out;
  };
  PreparedHalf half{{polarized_state(nh), StateVector::basis(nh, flip)}, undo, true};
  auto povm = PhasePOVM::linear(2 * nh);
  for (auto route : {PipelineRoute::Explicit, PipelineRoute::Spectral}) {
    auto o = joint_pipeline(half, half, povm, route);
    CHECK(o.fidelity == Approx(1.0).margin(1e-9));
    CHECK(o.p_select == Approx(0.5).margin(1e-12));
  }
}

TEST_CASE("fully flipped halves leave nothing to post-select") {
  const int nh = 8;
  const Bitmask all = (Bitmask{1} << nh) - 1;
  auto undo = [all](int k, const StateVector& v) {
    if (k == 0) return v;
    StateVector out(v.n_spins());
    for (std::size_t b = 0; b < v.dim(); ++b) out[Bitmask(b) ^ all] = v[Bitmask(b)];
    return out;
  };
  PreparedHalf half{{polarized_state(nh), StateVector::basis(nh, all)}, undo, true};
  CHECK_THROWS_AS(joint_pipeline(half, half, PhasePOVM::linear(2 * nh)), PostSelectionError);
}

TEST_CASE("grade-raising pipeline matches direct construction") {
  for (int nh : {2, 3, 4}) {
    Lattice l({nh}, CouplingMode::FullDipolar);
    auto half = gr_half(l, 2 * kPi * nh, polarized_state(nh));
    auto povm = PhasePOVM::linear(2 * nh);
    double p = 0.0;
    auto ref = brute_force_rho(half, half, povm, &p);
    for (auto route : {PipelineRoute::Explicit, PipelineRoute::Spectral}) {
      auto o = joint_pipeline(half, half, povm, route);
      CHECK((o.rho_q - ref).norm() < 1e-9);
      CHECK(o.p_select == Approx(p).epsilon(1e-9));
      check_valid(o);
    }
  }
}

TEST_CASE("XY pipeline matches direct construction") {
  Lattice l({3}, CouplingMode::FullDipolar);
  auto half = prepared(magnify_xy(l, kPi, 6, polarized_state(3)));
  auto povm = PhasePOVM::linear(6);
  auto ref = brute_force_rho(half, half, povm);
  auto o = joint_pipeline(half, half, povm);
  CHECK(o.route == "explicit");
  CHECK((o.rho_q - ref).norm() < 1e-9);
  check_valid(o);
  CHECK_THROWS(joint_pipeline(half, half, povm, PipelineRoute::Spectral));
}

TEST_CASE("unequal halves and non-basis branch 0 use the explicit route") {
  std::mt19937_64 rng(4);
  Lattice l3({3}, CouplingMode::FullDipolar), l2({2}, CouplingMode::FullDipolar);
  auto left = gr_half(l3, 5.0, testing_util::random_state(3, rng));
  auto right = gr_half(l2, 5.0, polarized_state(2));
  auto povm = PhasePOVM::linear(5);
  auto o = joint_pipeline(left, right, povm);
  CHECK(o.route == "explicit");
  CHECK((o.rho_q - brute_force_rho(left, right, povm)).norm() < 1e-9);
}

TEST_CASE("qubit state structure for identical halves") {
  Lattice l({6}, CouplingMode::FullDipolar);
  auto r = magnify_gr(l, 2 * kPi * 6, polarized_state(6));
  auto o = joint_pipeline(r, r, PhasePOVM::linear(12));
  check_valid(o);
  CHECK(o.rho_q(0, 0).real() + o.rho_q(3, 3).real() == Approx(1.0 - o.population).margin(1e-12));
  CHECK(o.fidelity == Approx(o.c0101 + o.c0110).margin(1e-12));
  CHECK(o.c0101 == Approx(o.c1010).margin(1e-12));
  CHECK(o.fidelity > 0.5);
}

TEST_CASE("mixed pipeline at eps = 0 equals the pure pipeline") {
  Lattice l({5}, CouplingMode::FullDipolar);
  const double t = 2 * kPi * 5;
  auto r = magnify_gr(l, t, polarized_state(5));
  auto povm = PhasePOVM::linear(10);
  auto pure = joint_pipeline(r, r, povm);
  auto mix = joint_pipeline_mixed(mixed_polarized(5, 0.0), mixed_polarized(5, 0.0), l, t, povm);
  CHECK((pure.rho_q - mix.rho_q).norm() < 1e-10);
  CHECK(mix.discarded_mass == 0.0);
  CHECK(mix.warnings.empty());
}

TEST_CASE("mixed pipeline: spectral and explicit routes agree") {
  Lattice l({3}, CouplingMode::FullDipolar);
  auto circuit = MagnificationCircuit::gr(l, 2 * kPi * 3);
  auto povm = PhasePOVM::linear(6, 0.3);
  auto mix = mixed_polarized(3, 0.3, 1.0);
  auto a = joint_pipeline_mixed(mix, mix, circuit, povm, PipelineRoute::Spectral);
  auto b = joint_pipeline_mixed(mix, mix, circuit, povm, PipelineRoute::Explicit);
  CHECK((a.rho_q - b.rho_q).norm() < 1e-9);
  CHECK(a.p_select == Approx(b.p_select).epsilon(1e-9));
  check_valid(a);
}

TEST_CASE("mixed pipeline equals the probability-weighted direct construction") {
  Lattice l({2}, CouplingMode::FullDipolar);
  const double t = 2 * kPi * 2;
  auto circuit = std::make_shared<const MagnificationCircuit>(MagnificationCircuit::gr(l, t));
  auto povm = PhasePOVM::linear(4, 0.4);
  auto mix = mixed_polarized(2, 0.4, 1.0);
  QubitDensityMatrix acc = QubitDensityMatrix::Zero();
  double ptot = 0.0;
  for (auto& a : mix.terms)
    for (auto& b : mix.terms) {
      auto sa = StateVector::basis(2, a.bitmask), sb = StateVector::basis(2, b.bitmask);
      PreparedHalf L{{sa, circuit->apply(1, sa)}, disentangler_of(circuit), true};
      PreparedHalf R{{sb, circuit->apply(1, sb)}, disentangler_of(circuit), true};
      double p = 0.0;
      auto rho = brute_force_rho(L, R, povm, &p);
      acc += a.probability * b.probability * p * rho;
      ptot += a.probability * b.probability * p;
    }
  auto o = joint_pipeline_mixed(mix, mix, l, t, povm);
  CHECK(o.p_select == Approx(ptot).epsilon(1e-10));
  CHECK((o.rho_q - acc / ptot).norm() < 1e-10);
}

TEST_CASE("maximally mixed halves give no Bell fidelity") {
  Lattice l({4}, CouplingMode::FullDipolar);
  auto mix = mixed_polarized(4, 1.0);
  auto o = joint_pipeline_mixed(mix, mix, MagnificationCircuit::gr(l, 2 * kPi * 4),
                                PhasePOVM::with_slope(8, 2 * kPi / 8));
  CHECK(o.fidelity <= 0.5 + 1e-6);
  CHECK_THROWS(PhasePOVM::linear(8, 1.0));
}

TEST_CASE("truncated mixtures raise a warning") {
  Lattice l({4}, CouplingMode::FullDipolar);
  auto mix = mixed_polarized(4, 0.3, 0.9);
  auto o = joint_pipeline_mixed(mix, mix, l, 3.0, PhasePOVM::linear(8, 0.3));
  CHECK(o.discarded_mass > 1e-6);
  CHECK(o.warnings.size() == 1);
}

TEST_CASE("mixed pipeline is deterministic under threading") {
  Lattice l({4}, CouplingMode::FullDipolar);
  auto mix = mixed_polarized(4, 0.2);
  auto povm = PhasePOVM::linear(8, 0.2);
  set_thread_count(1);
  auto a = joint_pipeline_mixed(mix, mix, l, 6.0, povm);
  set_thread_count(3);
  auto b = joint_pipeline_mixed(mix, mix, l, 6.0, povm);
  set_thread_count(1);
  CHECK(a.rho_q == b.rho_q);
}
