#pragma once

// Magnification circuits that turn one qubit's state into a collective
// magnetization difference of an MSS half.
//
//   XY: r rounds of (CNOT qubit->contact; exp(-i H_XY dt)).
//   GR: exp(-i H_2GR t); CNOT; exp(+i H_2GR t).
//
// The qubit never feels H, so the joint state is kept as two conditional MSS
// branches. MagnificationCircuit also undoes the circuit per branch, which the
// measurement pipeline needs for its disentangling step.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mesospin/core.hpp"
#include "mesospin/hamiltonian.hpp"
#include "mesospin/lattice.hpp"
#include "mesospin/propagator.hpp"
#include "mesospin/spectra.hpp"
#include "mesospin/state.hpp"

namespace mesospin {

enum class Protocol { XYRepeated, GROneTime };

inline std::string to_string(Protocol p) { return p == Protocol::XYRepeated ? "xy" : "gr"; }

inline Protocol parse_protocol(const std::string& s) {
  if (s == "xy") return Protocol::XYRepeated;
  if (s == "gr") return Protocol::GROneTime;
  throw std::invalid_argument("unknown protocol '" + s + "' (expected xy|gr)");
}

struct MagnificationParams {
  double dt = 0.0;  // XY
  int r = 0;        // XY
  double t = 0.0;   // GR
};

struct TranscriptSample {
  double time;
  double mean;
  double sd;
};

/// The pair of conditional unitaries U_0, U_1 of one circuit.
class MagnificationCircuit {
 public:
  static MagnificationCircuit xy(const Lattice& lattice, double dt, int r, PropagatorConfig cfg = {}) {
    if (r < 0) throw std::invalid_argument("magnify_xy: r must be >= 0");
    if (!std::isfinite(dt)) throw std::invalid_argument("magnify_xy: dt must be finite");
    return MagnificationCircuit(Protocol::XYRepeated, build_xy(lattice), lattice.contact_spin(), {dt, r, 0.0}, cfg);
  }

  static MagnificationCircuit gr(const Lattice& lattice, double t, PropagatorConfig cfg = {}) {
    if (!std::isfinite(t)) throw std::invalid_argument("magnify_gr: t must be finite");
    return MagnificationCircuit(Protocol::GROneTime, build_grade_raising(lattice), lattice.contact_spin(),
                                {0.0, 0, t}, cfg);
  }

  Protocol protocol() const { return protocol_; }
  const MagnificationParams& params() const { return params_; }
  int n_spins() const { return prop_->hamiltonian().n_spins(); }
  int contact() const { return contact_; }
  const Propagator& propagator() const { return *prop_; }

  /// U_0 is the identity, so branch 0 stays the input state.
  bool branch0_identity() const { return protocol_ == Protocol::GROneTime; }

  /// U_k v
  StateVector apply(int k, const StateVector& v, EvolveReport* report = nullptr) const {
    check_branch(k);
    if (protocol_ == Protocol::GROneTime) {
      if (k == 0) return v;
      return step(-params_.t, flip_spin(step(params_.t, v, report), contact_), report);
    }
    if (k == 0) return step(params_.dt * params_.r, v, report);
    StateVector w = v;
    for (int i = 0; i < params_.r; ++i) w = step(params_.dt, flip_spin(w, contact_), report);
    return w;
  }

  /// U_k^dagger v
  StateVector undo(int k, const StateVector& v, EvolveReport* report = nullptr) const {
    check_branch(k);
    if (protocol_ == Protocol::GROneTime) return apply(k, v, report);  // U_1 is Hermitian
    if (k == 0) return step(-params_.dt * params_.r, v, report);
    StateVector w = v;
    for (int i = 0; i < params_.r; ++i) w = flip_spin(step(-params_.dt, w, report), contact_);
    return w;
  }

 private:
  MagnificationCircuit(Protocol p, const SparseOperator& h, int contact, MagnificationParams params,
                       PropagatorConfig cfg)
      : protocol_(p), prop_(std::make_shared<Propagator>(h, cfg)), contact_(contact), params_(params) {}

  static void check_branch(int k) {
    if (k != 0 && k != 1) throw std::invalid_argument("MagnificationCircuit: branch must be 0 or 1");
  }

  StateVector step(double t, const StateVector& v, EvolveReport* report) const {
    auto r = prop_->evolve(t, v);
    if (report) *report += r.report;
    return std::move(r.state);
  }

  Protocol protocol_;
  std::shared_ptr<const Propagator> prop_;
  int contact_;
  MagnificationParams params_;
};

struct MagnificationResult {
  BranchState branch;
  Protocol protocol;
  MagnificationParams params;
  std::vector<TranscriptSample> transcript;
  EvolveReport report;
  std::shared_ptr<const MagnificationCircuit> circuit;
};

inline constexpr int kDefaultTranscriptPoints = 64;

struct TranscriptOptions {
  /// Samples on a uniform grid over [0, t]; 0 disables recording.
  int points = 0;
  /// Stop once the psi1 mean drops below n/4; later samples cannot change
  /// the transient metric.
  bool stop_at_transient = false;
  /// Skip grid times beyond this bound.
  double until = std::numeric_limits<double>::infinity();
};

inline void check_initial(const StateVector& initial, int n, const char* what) {
  if (initial.n_spins() != n)
    throw std::invalid_argument(std::string(what) + ": initial state does not match the lattice");
  if (!initial.is_normalized(1e-9)) throw std::invalid_argument(std::string(what) + ": initial state not normalized");
}

/// Repeated-interaction circuit. With record=true the transcript holds the
/// psi1 moments after every round (time = round * dt).
inline MagnificationResult magnify_xy(const Lattice& lattice, double dt, int r, const StateVector& initial,
                                      bool record = false, const PropagatorConfig& cfg = {}) {
  auto circuit = std::make_shared<const MagnificationCircuit>(MagnificationCircuit::xy(lattice, dt, r, cfg));
  check_initial(initial, lattice.n_spins(), "magnify_xy");
  MagnificationResult out{{initial, initial}, Protocol::XYRepeated, circuit->params(), {}, {}, circuit};
  out.branch.psi0 = circuit->apply(0, initial, &out.report);
  StateVector w = initial;
  if (record) {
    const auto m = moments(spectrum_of(w));
    out.transcript.push_back({0.0, m.mean, m.sd});
  }
  for (int i = 0; i < r; ++i) {
    auto e = circuit->propagator().evolve(dt, flip_spin(w, circuit->contact()));
    out.report += e.report;
    w = std::move(e.state);
    if (record) {
      const auto m = moments(spectrum_of(w));
      out.transcript.push_back({(i + 1) * dt, m.mean, m.sd});
    }
  }
  out.branch.psi1 = std::move(w);
  return out;
}

/// psi1 moments of the grade-raising circuit at each grid time s, i.e. of
/// exp(+i H s) X exp(-i H s) initial. The forward leg is carried along the grid;
/// the backward leg is recomputed per sample.
struct GrTranscript {
  std::vector<TranscriptSample> samples;
  EvolveReport report;
  std::optional<StateVector> psi1_at_end;  // set when the last grid point was reached
};

inline GrTranscript gr_transcript(const MagnificationCircuit& circuit, const StateVector& initial,
                                  const TranscriptOptions& opts) {
  if (opts.points < 2) throw std::invalid_argument("gr_transcript: transcript needs >= 2 points");
  GrTranscript out;
  const Propagator& prop = circuit.propagator();
  const double t = circuit.params().t;
  const double quarter = circuit.n_spins() / 4.0;
  StateVector forward = initial;
  double s_prev = 0.0;
  for (int i = 0; i < opts.points; ++i) {
    const double s = t * i / (opts.points - 1);
    if (std::abs(s) > opts.until) break;
    auto f = prop.evolve(s - s_prev, forward);
    out.report += f.report;
    forward = std::move(f.state);
    s_prev = s;
    auto b = prop.evolve(-s, flip_spin(forward, circuit.contact()));
    out.report += b.report;
    const auto m = moments(spectrum_of(b.state));
    out.samples.push_back({s, m.mean, m.sd});
    if (i == opts.points - 1) out.psi1_at_end = std::move(b.state);
    if (opts.stop_at_transient && m.mean < quarter) break;
  }
  return out;
}

/// One-time grade-raising circuit. psi0 is the input itself.
inline MagnificationResult magnify_gr(const Lattice& lattice, double t, const StateVector& initial,
                                      const TranscriptOptions& opts = {}, const PropagatorConfig& cfg = {}) {
  auto circuit = std::make_shared<const MagnificationCircuit>(MagnificationCircuit::gr(lattice, t, cfg));
  check_initial(initial, lattice.n_spins(), "magnify_gr");
  MagnificationResult out{{initial, initial}, Protocol::GROneTime, circuit->params(), {}, {}, circuit};
  std::optional<StateVector> psi1;
  if (opts.points != 0) {
    auto tr = gr_transcript(*circuit, initial, opts);
    out.transcript = std::move(tr.samples);
    out.report += tr.report;
    psi1 = std::move(tr.psi1_at_end);
  }
  out.branch.psi1 = psi1 ? std::move(*psi1) : circuit->apply(1, initial, &out.report);
  return out;
}

/// Earliest sampled time whose psi1 mean is below half its starting value
/// n/2, i.e. below n/4. +infinity if that never happens.
inline double transient_metric(const std::vector<TranscriptSample>& transcript, int n_spins) {
  if (transcript.empty()) throw std::invalid_argument("transient_metric: empty transcript");
  for (const auto& s : transcript)
    if (s.mean < n_spins / 4.0) return s.time;
  return std::numeric_limits<double>::infinity();
}

}  // namespace mesospin
