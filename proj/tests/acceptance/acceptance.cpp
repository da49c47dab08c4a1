// Acceptance criteria. `acceptance <id>` runs one criterion, no argument runs
// all of them. Each criterion prints a single PASS/FAIL line; the exit status
// is nonzero if any selected criterion failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mesospin/mesospin.hpp"

using namespace mesospin;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string f(double x, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

StateVector random_state(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  StateVector v(n);
  for (std::size_t i = 0; i < v.dim(); ++i) v[Bitmask(i)] = cplx(g(rng), g(rng));
  v *= 1.0 / v.norm();
  return v;
}

MagnificationResult gr_chain(int nh) {
  return magnify_gr(Lattice({nh}, CouplingMode::FullDipolar), 2 * kPi * nh, polarized_state(nh));
}

// 1. GR steady state
Verdict c1() {
  const auto r = gr_chain(12);
  const auto m = moments(spectrum_of(r.branch.psi1));
  const double sd_err = std::abs(m.sd - std::sqrt(12.0) / 2);
  return {std::abs(m.mean) <= 0.5 && sd_err <= 0.35,
          "mean " + f(m.mean) + " (|.| <= 0.5), sd " + f(m.sd) + " (|sd - sqrt(12)/2| = " + f(sd_err) + " <= 0.35)"};
}

// 2. XY steady state
Verdict c2() {
  const Lattice lat({12}, CouplingMode::FullDipolar);
  const double a12 = lat.couplings().at(0, 1);
  const auto r = magnify_xy(lat, kPi / a12, 24, polarized_state(12));
  const auto s = spectrum_of(r.branch.psi1);
  double off = 0.0;  // mass on m_z with 6 - m_z odd
  for (int k = 1; k <= 12; k += 2) off += s[k];
  const auto m = moments(s);
  const double sd_err = std::abs(m.sd - std::sqrt(12.0) / 2);
  const bool support = off <= 1e-12;
  return {support && std::abs(m.mean) <= 0.5 && sd_err <= 0.35,
          "mass off {6,4,..,-6} " + f(off) + ", mean " + f(m.mean) + ", sd " + f(m.sd) + " (|sd - sqrt(12)/2| = " +
              f(sd_err) + ")"};
}

// 3. Fidelity thresholds
Verdict c3() {
  bool ok = true;
  std::string d = "exact F:";
  for (int n : {12, 16, 20}) {
    const int nh = n / 2;
    const auto r = gr_chain(nh);
    const auto o = joint_pipeline(r, r, PhasePOVM::linear(n));
    ok = ok && o.fidelity > 0.5;
    d += " N=" + std::to_string(n) + " " + f(o.fidelity, 4);
  }
  const double f24 = extrapolate_fidelity(24, 0.0).fidelity;
  ok = ok && f24 > 0.78;
  d += "; extrapolated F(24) " + f(f24, 4);
  double prev = f24, f96 = f24;
  bool mono = true;
  for (int n = 26; n <= 96; n += 2) {
    const double x = extrapolate_fidelity(n, 0.0).fidelity;
    if (x < prev) mono = false;
    prev = x;
    f96 = x;
  }
  ok = ok && mono && f96 >= 0.95;
  d += std::string(", nondecreasing over 24..96: ") + (mono ? "yes" : "no") + ", F(96) " + f(f96, 4);
  return {ok, d};
}

// 4. Maximal micro-macro entanglement and its eps robustness
Verdict c4() {
  bool ok = true;
  std::string d = "Lneg(eps=0):";
  for (int nh : {6, 8, 10}) {
    const double l = log_negativity_from(branch_negativity(gr_chain(nh).branch));
    ok = ok && l >= 0.98;
    d += " Nh=" + std::to_string(nh) + " " + f(l, 5);
  }
  const std::vector<double> eps = {0.0, 0.1, 0.2};
  std::vector<double> l4, l10;
  for (double e : eps) {
    l4.push_back(micro_macro_negativity(Lattice({4}, CouplingMode::FullDipolar), 2 * kPi * 4, e).log_negativity);
    l10.push_back(micro_macro_negativity(Lattice({10}, CouplingMode::FullDipolar), 2 * kPi * 10, e).log_negativity);
  }
  for (std::size_t i = 1; i < eps.size(); ++i) ok = ok && l4[i] < l4[i - 1] && l10[i] < l10[i - 1];
  ok = ok && l10[2] >= l4[2];
  d += "; Nh=4 over eps {0,0.1,0.2}: " + f(l4[0], 4) + " " + f(l4[1], 4) + " " + f(l4[2], 4);
  d += "; Nh=10: " + f(l10[0], 4) + " " + f(l10[1], 4) + " " + f(l10[2], 4);
  return {ok, d};
}

// 5a. Dicke closed form, every k = 1..N_h and every lost spin, N_h <= 14
Verdict c5a() {
  double worst = 0.0;
  long cases = 0;
  for (int nh = 1; nh <= 14; ++nh) {
    const auto psi0 = polarized_state(nh);
    for (int k = 1; k <= nh; ++k) {
      const BranchState b{psi0, dicke_state(nh, k)};
      const double expect = ep_closed_form(1.0 - double(k) / nh);
      for (int a = 0; a < nh; ++a) {
        worst = std::max(worst, std::abs(lose_particle(b, a).e_p - expect));
        ++cases;
      }
    }
  }
  return {worst <= 1e-10, std::to_string(cases) + " cases, max |e_p - E_p^r(1 - k/Nh)| = " + f(worst, 3)};
}

// 5b. The closed form at r_up = 1/2 equals 2/3
Verdict c5b() {
  const double v = ep_closed_form(0.5);
  return {std::abs(v - 2.0 / 3.0) <= 1e-12, "E_p^r(1/2) = " + f(v, 12) + ", expected 2/3"};
}

// 6. Loss asymptote and fidelity bound
Verdict c6() {
  bool ok = true;
  std::string d;
  for (int nh : {12, 14}) {
    const auto r = gr_chain(nh);
    const double ep = average_loss_ep(r.branch);
    const double bound = loss_fidelity_bound(r.branch, r.branch);
    ok = ok && std::abs(ep - 2.0 / 3.0) <= 0.05 && std::abs(bound - 0.75) <= 0.03;
    d += "Nh=" + std::to_string(nh) + ": e_p " + f(ep, 4) + ", bound " + f(bound, 4) + "; ";
  }
  return {ok, d};
}

// Transient metrics of two lattices on the same grid. `a` runs until its
// crossing; `b` is sampled only up to that time, which decides a < b.
std::pair<double, double> transient_pair(const Lattice& a, const Lattice& b) {
  const int n = a.n_spins();
  const double t = 2 * kPi * n;
  TranscriptOptions opts;
  opts.points = kDefaultTranscriptPoints;
  opts.stop_at_transient = true;
  const auto ta = gr_transcript(MagnificationCircuit::gr(a, t), polarized_state(n), opts);
  const double ma = transient_metric(ta.samples, n);
  if (std::isfinite(ma)) opts.until = ma;
  const auto tb = gr_transcript(MagnificationCircuit::gr(b, t), polarized_state(n), opts);
  return {ma, transient_metric(tb.samples, n)};
}

// 7. Transient ordering
Verdict c7() {
  const auto [m2d, m1d] =
      transient_pair(Lattice({4, 5}, CouplingMode::FullDipolar), Lattice({20}, CouplingMode::FullDipolar));
  const auto [mdip, mnn] =
      transient_pair(Lattice({16}, CouplingMode::FullDipolar), Lattice({16}, CouplingMode::NearestNeighbor));
  const auto g = [](double x) { return std::isfinite(x) ? f(x, 4) : std::string("not crossed"); };
  return {m2d < m1d && mdip < mnn, "4x5 " + g(m2d) + " vs 1D-20 " + g(m1d) + " (sampled to the 4x5 time); Nh=16 dipolar " +
                                       g(mdip) + " vs nn " + g(mnn) + " (sampled to the dipolar time)"};
}

// 8. Krylov against dense eigendecomposition
Verdict c8() {
  std::mt19937_64 rng(20240608);
  std::uniform_int_distribution<int> pick_n(1, 8), pick_h(0, 2), pick_mode(0, 1);
  std::uniform_real_distribution<double> pick_t(-20.0, 20.0);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int n = pick_n(rng);
    std::vector<int> dims = {n};
    if (n >= 4 && n % 2 == 0 && pick_mode(rng)) dims = {2, n / 2};
    const Lattice lat(dims, pick_mode(rng) ? CouplingMode::FullDipolar : CouplingMode::NearestNeighbor);
    const int kind = pick_h(rng);
    const auto h = kind == 0 ? build_dipolar(lat) : kind == 1 ? build_xy(lat) : build_grade_raising(lat);
    const double t = pick_t(rng);
    const auto v = random_state(n, rng);
    const auto k = evolve(h, t, v);
    const auto d = evolve_dense_oracle(h, t, v);
    for (std::size_t i = 0; i < v.dim(); ++i) worst = std::max(worst, std::abs(k[Bitmask(i)] - d[Bitmask(i)]));
  }
  return {worst < 1e-8, "50 cases, max amplitude error " + f(worst, 3)};
}

// 9. Structural invariants
Verdict c9() {
  std::mt19937_64 rng(99);
  // POVM completeness
  double povm = 0.0;
  for (int n : {8, 12, 20, 40})
    for (double eps : {0.0, 0.1, 0.5}) {
      const auto p = PhasePOVM::linear(n, eps);
      for (int k = 0; k <= n; ++k) {
        const double m = magnetization_of_downs(n, k);
        povm = std::max(povm, std::abs(p.e0(m) + p.e1(m) - 1.0));
      }
    }
  // norm conservation
  double norm = 0.0;
  for (int n : {6, 10, 12}) {
    const Lattice lat({n}, CouplingMode::FullDipolar);
    const auto r = gr_chain(n);
    norm = std::max({norm, std::abs(r.branch.psi1.norm() - 1.0)});
    const auto x = magnify_xy(lat, kPi, 2 * n, polarized_state(n));
    norm = std::max({norm, std::abs(x.branch.psi0.norm() - 1.0), std::abs(x.branch.psi1.norm() - 1.0)});
    const auto v = random_state(n, rng);
    norm = std::max(norm, std::abs(evolve(build_dipolar(lat), 7.3, v).norm() - 1.0));
  }
  // convolution of spectra = spectrum of the tensor product
  double conv = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = random_state(1 + rep % 5, rng), b = random_state(1 + (3 * rep) % 6, rng);
    const auto lhs = spectrum_of(tensor(a, b));
    const auto rhs = convolve(spectrum_of(a), spectrum_of(b));
    for (std::size_t k = 0; k < lhs.size(); ++k) conv = std::max(conv, std::abs(lhs[int(k)] - rhs[int(k)]));
  }
  // apparatus model equals M_1 (up to its global factor i)
  double app = 0.0;
  for (int n = 1; n <= 8; ++n)
    for (int other : {0, 3}) {
      const auto p = PhasePOVM::linear(n + other, 0.1);
      const auto v = random_state(n, rng);
      const double shift = other ? 0.5 : 0.0;
      const auto m1 = povm_apply(p, v, shift, other);
      const auto ap = apparatus_outcome(p, v, shift, other);
      for (std::size_t i = 0; i < v.dim(); ++i)
        app = std::max(app, std::abs(m1.state[Bitmask(i)] - cplx(0, 1) * ap.state[Bitmask(i)]));
      app = std::max(app, std::abs(m1.weight - ap.weight));
    }
  // GR branch 0 is the input, bit for bit
  bool bitwise = true;
  for (int n : {4, 7, 10}) {
    const auto init = random_state(n, rng);
    const auto r = magnify_gr(Lattice({n}, CouplingMode::FullDipolar), 1.7 * n, init);
    for (std::size_t i = 0; i < init.dim(); ++i) bitwise = bitwise && r.branch.psi0[Bitmask(i)] == init[Bitmask(i)];
  }
  const bool ok = povm <= 1e-15 && norm <= 1e-9 && conv <= 1e-12 && app <= 1e-12 && bitwise;
  return {ok, "POVM " + f(povm, 3) + ", norm " + f(norm, 3) + ", convolution " + f(conv, 3) + ", apparatus " +
                  f(app, 3) + ", branch-0 bitwise " + (bitwise ? "yes" : "no")};
}

// 10. Mixed-state robustness of the relative coherence
Verdict c10() {
  auto coherence = [](int nh, double eps) {
    const auto mix = mixed_polarized(nh, eps);
    const auto o = joint_pipeline_mixed(mix, mix, Lattice({nh}, CouplingMode::FullDipolar), 2 * kPi * nh,
                                        PhasePOVM::linear(2 * nh, eps));
    return o.coherence_rel;
  };
  const double c0 = coherence(10, 0.0), c01 = coherence(10, 0.1);
  bool ok = c01 >= 0.8 * c0;
  std::string d = "N=20: c(0) " + f(c0, 4) + ", c(0.1) " + f(c01, 4) + "; N=20 vs N=8 at eps";
  for (double e : {0.05, 0.1, 0.2}) {
    const double big = e == 0.1 ? c01 : coherence(10, e);
    const double small = coherence(4, e);
    ok = ok && big >= small;
    d += " " + f(e, 2) + ": " + f(big, 4) + " vs " + f(small, 4) + ";";
  }
  return {ok, d};
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"1", "GR steady state, Nh=12", c1},
      {"2", "XY steady state, Nh=12", c2},
      {"3", "fidelity thresholds", c3},
      {"4", "micro-macro log negativity", c4},
      {"5a", "Dicke closed form, k=1..Nh, Nh<=14", c5a},
      {"5b", "E_p^r(1/2) = 2/3", c5b},
      {"6", "loss asymptote and fidelity bound", c6},
      {"7", "transient ordering", c7},
      {"8", "Krylov vs dense oracle", c8},
      {"9", "structural invariants", c9},
      {"10", "mixed-state robustness", c10},
  };
  std::vector<const Criterion*> selected;
  for (int i = 1; i < argc; ++i) {
    bool found = false;
    for (const auto& c : all)
      if (c.id == argv[i]) {
        selected.push_back(&c);
        found = true;
      }
    if (!found) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
      return 2;
    }
  }
  if (selected.empty())
    for (const auto& c : all) selected.push_back(&c);

  int failed = 0;
  for (const auto* c : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = c->run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %s (%s): %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c->id.c_str(), c->title.c_str(),
                v.detail.c_str(), s);
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed ? 1 : 0;
}
