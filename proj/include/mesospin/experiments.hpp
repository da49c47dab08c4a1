#pragma once

// Named experiments: read a Config, compute, write one CSV and a JSON
// manifest next to it. Outputs are first written as "<name>.partial" and only
// renamed once the whole experiment has succeeded, so a failure leaves
// nothing behind.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mesospin/config.hpp"
#include "mesospin/entanglement.hpp"
#include "mesospin/largescale.hpp"
#include "mesospin/magnification.hpp"
#include "mesospin/measurement.hpp"
#include "mesospin/parallel.hpp"
#include "mesospin/spectra.hpp"

#ifndef MESOSPIN_VERSION
#define MESOSPIN_VERSION "unknown"
#endif

namespace mesospin {

using Json = nlohmann::ordered_json;

inline constexpr const char* kCodeVersion = MESOSPIN_VERSION;

struct Invariant {
  std::string name;
  bool ok;
  std::string detail;
};

struct PointRecord {
  std::string label;
  double runtime_seconds = 0.0;
  EvolveReport report;
  std::optional<double> discarded_mass;  // mixed runs only
};

struct RunOptions {
  std::filesystem::path out_dir = ".";
};

struct RunRecord {
  Experiment experiment;
  std::filesystem::path output;
  std::filesystem::path manifest;
  std::vector<Invariant> invariants;
  std::vector<std::string> warnings;
  Json summary = Json::object();
  double runtime_seconds = 0.0;

  bool invariants_held() const {
    for (const auto& i : invariants)
      if (!i.ok) return false;
    return true;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

/// Collects everything a run produces before it is committed to disk.
class RunContext {
 public:
  std::ostringstream csv;
  std::vector<PointRecord> points;
  std::vector<Invariant> invariants;
  std::vector<std::string> warnings;
  Json summary = Json::object();

  RunContext() { csv.precision(17); }

  void check(const std::string& name, bool ok, const std::string& detail = "") {
    invariants.push_back({name, ok, detail});
  }
};

inline Json to_json(const EvolveReport& r) {
  return Json{{"substeps", r.substeps}, {"matvecs", r.matvecs}, {"error_estimate", r.error_estimate}};
}

/// Writes `text` to `path` through a ".partial" file.
class StagedFile {
 public:
  explicit StagedFile(std::filesystem::path path) : path_(std::move(path)) {
    staged_ = path_;
    staged_ += ".partial";
  }
  StagedFile(const StagedFile&) = delete;
  StagedFile& operator=(const StagedFile&) = delete;
  ~StagedFile() {
    std::error_code ec;
    if (!committed_) std::filesystem::remove(staged_, ec);
  }

  void write(const std::string& text) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream f(staged_, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + staged_.string() + "'");
    f << text;
    f.close();
    if (!f) throw Error("write to '" + staged_.string() + "' failed");
  }

  void commit() {
    std::filesystem::rename(staged_, path_);
    committed_ = true;
  }

 private:
  std::filesystem::path path_, staged_;
  bool committed_ = false;
};

inline ExprContext context_for(const Lattice& lat) {
  ExprContext ctx{static_cast<double>(lat.n_spins()), std::nullopt};
  if (lat.n_spins() >= 2) ctx.a12 = lat.couplings().at(0, 1);
  return ctx;
}

inline void check_norm(RunContext& rc, const std::string& what, const StateVector& v) {
  const double e = std::abs(v.norm() - 1.0);
  rc.check("norm conservation (" + what + ")", e <= 1e-9, "|norm - 1| = " + fmt(e));
}

inline void write_spectra(RunContext& rc, const Spectrum& s0, const Spectrum& s1) {
  rc.csv << "m_z,P_psi0,P_psi1\n";
  for (int k = 0; k <= s0.n_spins(); ++k) rc.csv << s0.m_of(k) << "," << s0[k] << "," << s1[k] << "\n";
}

inline Json spectrum_summary(const Spectrum& s0, const Spectrum& s1) {
  const auto m0 = moments(s0), m1 = moments(s1);
  return Json{{"psi0_mean", m0.mean},
              {"psi0_sd", m0.sd},
              {"psi1_mean", m1.mean},
              {"psi1_sd", m1.sd},
              {"distinctness_ratio", distinctness_ratio(s0, s1)},
              {"distinguishable", distinguishable(s0, s1)}};
}

inline void check_rho(RunContext& rc, const std::string& label, const JointOutcome& o) {
  const double tr = std::abs(o.rho_q.trace() - cplx(1.0));
  Eigen::SelfAdjointEigenSolver<QubitDensityMatrix> es(o.rho_q, Eigen::EigenvaluesOnly);
  const double min_ev = es.eigenvalues().minCoeff();
  rc.check("rho_q valid (" + label + ")", tr <= 1e-9 && min_ev >= -1e-9,
           "|tr - 1| = " + fmt(tr) + ", min eigenvalue = " + fmt(min_ev));
  rc.check("p_select in (0, 1] (" + label + ")", o.p_select > 0.0 && o.p_select <= 1.0 + 1e-9,
           "p_select = " + fmt(o.p_select));
}

inline double slope_or_auto(const std::string& text, int n_total, double eps) {
  if (text == "auto") return auto_theta_slope(n_total, eps);
  return evaluate_expression(text, ExprContext{n_total / 2.0, std::nullopt}, "theta_slope");
}

inline std::vector<double> checked_eps_grid(const Config& c) {
  auto g = c.real_list("eps_grid");
  for (double e : g)
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("eps_grid: values must lie in [0, 1]");
  return g;
}

using Body = std::function<void(RunContext&)>;

// ---- experiments; each reads every parameter before returning its body ----

inline Body plan_spectra(const Config& c, Protocol proto) {
  const Lattice lat = c.lattice();
  const auto cfg = c.propagator();
  const auto ctx = context_for(lat);
  double t = 0.0, dt = 0.0;
  long reps = 0;
  if (proto == Protocol::GROneTime) {
    t = c.real("t", ctx);
  } else {
    dt = c.real("dt", ctx);
    reps = c.integer("reps");
    if (reps < 0) throw ConfigError("reps must be >= 0");
  }
  return [=](RunContext& rc) {
    const auto t0 = Clock::now();
    const auto init = polarized_state(lat.n_spins());
    const auto r = proto == Protocol::GROneTime ? magnify_gr(lat, t, init, {}, cfg)
                                                : magnify_xy(lat, dt, static_cast<int>(reps), init, false, cfg);
    rc.points.push_back({lat.describe(), seconds_since(t0), r.report, std::nullopt});
    const auto s0 = spectrum_of(r.branch.psi0), s1 = spectrum_of(r.branch.psi1);
    write_spectra(rc, s0, s1);
    rc.summary = spectrum_summary(s0, s1);
    rc.summary["overlap_abs"] = std::abs(inner(r.branch.psi0, r.branch.psi1));
    check_norm(rc, "psi0", r.branch.psi0);
    check_norm(rc, "psi1", r.branch.psi1);
    if (proto == Protocol::GROneTime) {
      bool same = true;
      for (std::size_t i = 0; i < init.dim(); ++i) same = same && r.branch.psi0[Bitmask(i)] == init[Bitmask(i)];
      rc.check("branch-0 identity", same);
    }
  };
}

inline void write_transcript(RunContext& rc, const std::string& label, const std::vector<TranscriptSample>& tr) {
  for (const auto& s : tr) rc.csv << label << "," << s.time << "," << s.mean << "," << s.sd << "\n";
}

inline Body plan_moments(const Config& c) {
  const Lattice lat = c.lattice();
  const auto cfg = c.propagator();
  const auto ctx = context_for(lat);
  const Protocol proto = c.protocol();
  double t = 0.0, dt = 0.0;
  long reps = 0, points = 0;
  if (proto == Protocol::GROneTime) {
    t = c.real("t", ctx);
    points = c.integer_or("points", kDefaultTranscriptPoints);
    if (points < 2) throw ConfigError("points must be >= 2");
  } else {
    dt = c.real("dt", ctx);
    reps = c.integer("reps");
    if (reps < 0) throw ConfigError("reps must be >= 0");
  }
  return [=](RunContext& rc) {
    const auto t0 = Clock::now();
    const auto init = polarized_state(lat.n_spins());
    TranscriptOptions opts;
    opts.points = static_cast<int>(points);
    const auto r = proto == Protocol::GROneTime ? magnify_gr(lat, t, init, opts, cfg)
                                                : magnify_xy(lat, dt, static_cast<int>(reps), init, true, cfg);
    rc.points.push_back({lat.describe(), seconds_since(t0), r.report, std::nullopt});
    rc.csv << "lattice,time,mean,sd\n";
    write_transcript(rc, lat.describe(), r.transcript);
    const double metric = transient_metric(r.transcript, lat.n_spins());
    rc.summary["transient_metric"] = std::isfinite(metric) ? Json(metric) : Json("inf");
    check_norm(rc, "psi1", r.branch.psi1);
  };
}

/// Transcripts of two lattices on one grid; `a` is expected to cross n/4
/// first. With early_stop, `a` stops at its crossing and `b` is sampled only
/// up to that time, which is enough to decide the ordering.
inline Body plan_transient_pair(const Lattice& a, const Lattice& b, const Config& c) {
  if (a.n_spins() != b.n_spins()) throw ConfigError("compared lattices must have the same number of spins");
  const auto cfg = c.propagator();
  const double t = c.real("t", context_for(a));
  const long points = c.integer_or("points", kDefaultTranscriptPoints);
  if (points < 2) throw ConfigError("points must be >= 2");
  const bool early = c.boolean_or("early_stop", false);
  return [=](RunContext& rc) {
    const int n = a.n_spins();
    const auto init = polarized_state(n);
    TranscriptOptions oa;
    oa.points = static_cast<int>(points);
    oa.stop_at_transient = early;
    auto t0 = Clock::now();
    auto ca = MagnificationCircuit::gr(a, t, cfg);
    auto ta = gr_transcript(ca, init, oa);
    rc.points.push_back({a.describe(), seconds_since(t0), ta.report, std::nullopt});
    const double ma = transient_metric(ta.samples, n);

    TranscriptOptions ob = oa;
    if (early && std::isfinite(ma)) ob.until = ma;
    t0 = Clock::now();
    auto cb = MagnificationCircuit::gr(b, t, cfg);
    auto tb = gr_transcript(cb, init, ob);
    rc.points.push_back({b.describe(), seconds_since(t0), tb.report, std::nullopt});
    const double mb = transient_metric(tb.samples, n);

    rc.csv << "lattice,time,mean,sd\n";
    write_transcript(rc, a.describe(), ta.samples);
    write_transcript(rc, b.describe(), tb.samples);
    auto js = [](double x) { return std::isfinite(x) ? Json(x) : Json("inf"); };
    rc.summary["metric_" + a.describe()] = js(ma);
    // With early stopping, "inf" for b means "not crossed by metric a".
    rc.summary["metric_" + b.describe()] = js(mb);
    rc.summary["early_stop"] = early;
    rc.check("transient ordering " + a.describe() + " < " + b.describe(), ma < mb,
             fmt(ma) + " vs " + fmt(mb));
  };
}

inline Body plan_dim_compare(const Config& c) {
  return plan_transient_pair(c.lattice("dims_a"), c.lattice("dims_b"), c);
}

inline Body plan_nn_compare(const Config& c) {
  const auto d = c.dims();
  return plan_transient_pair(Lattice(d, CouplingMode::FullDipolar), Lattice(d, CouplingMode::NearestNeighbor), c);
}

inline Body plan_fidelity_curve(const Config& c) {
  const auto n_grid = c.int_list("n_grid");
  for (int n : n_grid)
    if (n < 2 || n % 2) throw ConfigError("n_grid: N must be even and >= 2");
  const double eps = c.real("eps");
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("eps must lie in [0, 1]");
  const std::string slope = c.require("theta_slope");
  const std::string method = c.require("method");
  if (method != "exact" && method != "binomial") throw ConfigError("method: expected exact|binomial");
  std::string t_text;
  CouplingMode mode = CouplingMode::FullDipolar;
  PropagatorConfig cfg;
  if (method == "exact") {
    t_text = c.require("t");
    mode = c.coupling();
    cfg = c.propagator();
    for (int n : n_grid)
      if (n / 2 > 18) throw ConfigError("n_grid: exact method limited to N <= 36");
  } else {
    for (int n : n_grid)
      if (n < 8) throw ConfigError("n_grid: binomial method needs N >= 8");
  }
  return [=](RunContext& rc) {
    struct Row {
      JointOutcome o;
      double runtime;
    };
    auto rows = parallel_map(n_grid.size(), [&](std::size_t i) {
      const auto t0 = Clock::now();
      const int n = n_grid[i];
      const double s = slope_or_auto(slope, n, eps);
      JointOutcome o;
      if (method == "exact") {
        const Lattice lat({n / 2}, mode);
        const double t = evaluate_expression(t_text, context_for(lat), "t");
        const auto mix = mixed_polarized(n / 2, eps);
        o = joint_pipeline_mixed(mix, mix, lat, t, PhasePOVM::with_slope(n, s), cfg);
      } else {
        const BinomialModel m{n / 2, eps};
        o = spectral_outcome(m.p0(), m.p1(), PhasePOVM::with_slope(n, s));
      }
      return Row{o, seconds_since(t0)};
    });
    rc.csv << "N,eps,p_select,population,coherence_rel,fidelity\n";
    double prev = -1.0;
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& o = rows[i].o;
      const std::string label = "N=" + std::to_string(n_grid[i]);
      rc.csv << n_grid[i] << "," << eps << "," << o.p_select << "," << o.population << "," << o.coherence_rel << ","
             << o.fidelity << "\n";
      rc.points.push_back({label, rows[i].runtime, o.report,
                           method == "exact" ? std::optional<double>(o.discarded_mass) : std::nullopt});
      for (const auto& w : o.warnings) rc.warnings.push_back(label + ": " + w);
      check_rho(rc, label, o);
      if (method == "exact") rc.check("fidelity > 0.5 (" + label + ")", o.fidelity > 0.5, fmt(o.fidelity));
      if (i > 0 && n_grid[i] > n_grid[i - 1] && o.fidelity < prev) monotone = false;
      prev = o.fidelity;
    }
    if (method == "binomial") rc.check("fidelity nondecreasing in N", monotone);
  };
}

inline Body plan_negativity_sweep(const Config& c) {
  const Lattice lat = c.lattice();
  const auto cfg = c.propagator();
  const double t = c.real("t", context_for(lat));
  const auto eps = checked_eps_grid(c);
  if (lat.n_spins() + 1 > kMaxNegativitySpins) throw ConfigError("dims: negativity needs N_h <= 11");
  return [=](RunContext& rc) {
    struct Row {
      MixedNegativity m;
      double runtime;
    };
    auto rows = parallel_map(eps.size(), [&](std::size_t i) {
      const auto t0 = Clock::now();
      auto m = micro_macro_negativity(lat, t, eps[i], cfg);
      return Row{m, seconds_since(t0)};
    });
    rc.csv << "eps,negativity,log_negativity,kept_mass,terms\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& m = rows[i].m;
      const std::string label = "eps=" + fmt(eps[i]);
      rc.csv << eps[i] << "," << m.negativity << "," << m.log_negativity << "," << 1.0 - m.discarded_mass << ","
             << m.terms << "\n";
      rc.points.push_back({label, rows[i].runtime, m.report, m.discarded_mass});
      rc.check("0 <= Lneg <= 1 (" + label + ")", m.log_negativity >= -1e-12 && m.log_negativity <= 1.0 + 1e-9,
               fmt(m.log_negativity));
      rc.check("Lneg = log2(2 Neg + 1) (" + label + ")",
               std::abs(m.log_negativity - std::log2(2.0 * m.negativity + 1.0)) <= 1e-12);
      rc.check("kept mass >= 1 - 1e-6 (" + label + ")", m.discarded_mass <= 1e-6 * (1.0 + 1e-9),
               "discarded " + fmt(m.discarded_mass));
    }
  };
}

inline Body plan_mixed_fidelity(const Config& c) {
  const Lattice lat = c.lattice();
  const auto cfg = c.propagator();
  const double t = c.real("t", context_for(lat));
  const auto eps = checked_eps_grid(c);
  const std::string slope = c.require("theta_slope");
  return [=](RunContext& rc) {
    const int n = 2 * lat.n_spins();
    const auto circuit = MagnificationCircuit::gr(lat, t, cfg);
    struct Row {
      JointOutcome o;
      double runtime;
    };
    auto rows = parallel_map(eps.size(), [&](std::size_t i) {
      const auto t0 = Clock::now();
      const auto mix = mixed_polarized(lat.n_spins(), eps[i]);
      auto o = joint_pipeline_mixed(mix, mix, circuit, PhasePOVM::with_slope(n, slope_or_auto(slope, n, eps[i])));
      return Row{o, seconds_since(t0)};
    });
    rc.csv << "N,eps,p_select,population,coherence_rel,fidelity,kept_mass\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& o = rows[i].o;
      const std::string label = "eps=" + fmt(eps[i]);
      rc.csv << n << "," << eps[i] << "," << o.p_select << "," << o.population << "," << o.coherence_rel << ","
             << o.fidelity << "," << 1.0 - o.discarded_mass << "\n";
      rc.points.push_back({label, rows[i].runtime, o.report, o.discarded_mass});
      for (const auto& w : o.warnings) rc.warnings.push_back(label + ": " + w);
      check_rho(rc, label, o);
    }
  };
}

inline Body plan_loss_ep(const Config& c) {
  const Lattice lat = c.lattice();
  const auto cfg = c.propagator();
  const auto t_grid = c.real_list("t_grid", context_for(lat));
  return [=](RunContext& rc) {
    const int n = lat.n_spins();
    struct Row {
      double mean, ep, worst_norm, min_ep, max_ep, bound;
      EvolveReport rep;
      double runtime;
    };
    auto rows = parallel_map(t_grid.size(), [&](std::size_t i) {
      const auto t0 = Clock::now();
      const auto init = polarized_state(n);
      auto r = magnify_gr(lat, t_grid[i], init, {}, cfg);
      Row row{moments(spectrum_of(r.branch.psi1)).mean, 0.0, 0.0, 1.0, 0.0,
              loss_fidelity_bounds(r.branch).per_spin, r.report, 0.0};
      for (int a = 0; a < n; ++a) {
        const auto o = lose_particle(r.branch, a);
        row.ep += o.e_p / n;
        row.worst_norm = std::max(row.worst_norm, std::abs(o.p_up + o.p_down - 1.0));
        row.min_ep = std::min(row.min_ep, o.e_p);
        row.max_ep = std::max(row.max_ep, o.e_p);
      }
      row.runtime = seconds_since(t0);
      return row;
    });
    rc.csv << "t,mean_spectrum,e_p_avg\n";
    Json bounds = Json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const std::string label = "t=" + fmt(t_grid[i]);
      rc.csv << t_grid[i] << "," << r.mean << "," << r.ep << "\n";
      rc.points.push_back({label, r.runtime, r.rep, std::nullopt});
      rc.check("p_up + p_down = 1 (" + label + ")", r.worst_norm <= 1e-10, fmt(r.worst_norm));
      rc.check("0 <= e_p <= 1 (" + label + ")", r.min_ep >= -1e-12 && r.max_ep <= 1.0 + 1e-12);
      bounds.push_back(Json{{"t", t_grid[i]}, {"loss_fidelity_bound", r.bound}});
    }
    rc.summary["loss_fidelity_bound"] = bounds;
  };
}

inline Body plan_extrapolate(const Config& c) {
  const auto n_grid = c.int_list("n_grid");
  const auto eps = checked_eps_grid(c);
  const std::string slope = c.require("theta_slope");
  for (int n : n_grid)
    if (n < 8 || n % 2) throw ConfigError("n_grid: N must be even and >= 8");
  return [=](RunContext& rc) {
    const auto t0 = Clock::now();
    rc.csv << "N,eps,slope,p_select,population,coherence_rel,fidelity\n";
    for (int n : n_grid)
      for (double e : eps) {
        const double s = slope_or_auto(slope, n, e);
        const auto x = extrapolate_fidelity(n, e, s);
        rc.csv << n << "," << e << "," << s << "," << x.p_select << "," << x.population << "," << x.coherence_rel
               << "," << x.fidelity << "\n";
        rc.check("population in [0, 1] (N=" + std::to_string(n) + ", eps=" + fmt(e) + ")",
                 x.population >= -1e-12 && x.population <= 1.0 + 1e-12, fmt(x.population));
      }
    rc.points.push_back({"grid", seconds_since(t0), {}, std::nullopt});
  };
}

inline Body plan(const Config& c, Experiment e) {
  switch (e) {
    case Experiment::SpectraXY:
      return plan_spectra(c, Protocol::XYRepeated);
    case Experiment::SpectraGR:
      return plan_spectra(c, Protocol::GROneTime);
    case Experiment::MomentsVsTime:
      return plan_moments(c);
    case Experiment::DimCompare:
      return plan_dim_compare(c);
    case Experiment::NnCompare:
      return plan_nn_compare(c);
    case Experiment::FidelityCurve:
      return plan_fidelity_curve(c);
    case Experiment::NegativitySweep:
      return plan_negativity_sweep(c);
    case Experiment::MixedFidelity:
      return plan_mixed_fidelity(c);
    case Experiment::LossEp:
      return plan_loss_ep(c);
    case Experiment::Extrapolate:
      return plan_extrapolate(c);
  }
  throw ConfigError("unhandled experiment");
}

}  // namespace detail

/// Reads and checks every parameter without computing anything.
inline void validate(const Config& c) {
  const auto e = c.experiment();
  try {
    (void)c.require("out");
    (void)c.seed();
    (void)detail::plan(c, e);
    c.check_all_used();
  } catch (const std::exception& ex) {
    throw ConfigError("experiment " + to_string(e) + ": " + ex.what());
  }
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& out) {
  auto m = out;
  m.replace_extension(".manifest.json");
  return m;
}

inline RunRecord run(const Config& c, const RunOptions& opts = {}) {
  const auto t0 = detail::Clock::now();
  const auto e = c.experiment();
  validate(c);
  RunRecord rec{e, {}, {}, {}, {}, Json::object(), 0.0};
  std::filesystem::path out = c.require("out");
  if (out.is_relative()) out = opts.out_dir / out;
  rec.output = out;
  rec.manifest = manifest_path_for(out);

  detail::RunContext rc;
  try {
    detail::plan(c, e)(rc);
  } catch (const std::exception& ex) {
    throw Error("experiment " + to_string(e) + ": " + ex.what());
  }
  rec.invariants = rc.invariants;
  rec.warnings = rc.warnings;
  rec.summary = rc.summary;
  rec.runtime_seconds = detail::seconds_since(t0);

  Json m;
  m["code_version"] = kCodeVersion;
  m["experiment"] = to_string(e);
  Json cfg_echo = Json::object();
  for (const auto& [k, v] : c.entries()) cfg_echo[k] = v;
  m["config"] = cfg_echo;
  m["seed"] = c.seed();
  m["threads"] = thread_count();
  const auto pc = c.propagator();
  m["propagator"] = Json{{"krylov_dim", pc.krylov_dim}, {"tol", pc.tol}, {"max_substeps", pc.max_substeps}};
  m["output"] = out.string();
  m["runtime_seconds"] = rec.runtime_seconds;
  Json pts = Json::array();
  for (const auto& p : rc.points) {
    Json j{{"label", p.label}, {"runtime_seconds", p.runtime_seconds}, {"propagator", detail::to_json(p.report)}};
    if (p.discarded_mass) {
      j["discarded_mass"] = *p.discarded_mass;
      j["kept_mass"] = 1.0 - *p.discarded_mass;
    }
    pts.push_back(j);
  }
  m["points"] = pts;
  Json inv = Json::array();
  for (const auto& i : rc.invariants) inv.push_back(Json{{"name", i.name}, {"ok", i.ok}, {"detail", i.detail}});
  m["invariants"] = inv;
  m["all_invariants_held"] = rec.invariants_held();
  m["warnings"] = rc.warnings;
  m["summary"] = rc.summary;

  detail::StagedFile csv(out), manifest(rec.manifest);
  csv.write(rc.csv.str());
  manifest.write(m.dump(2) + "\n");
  csv.commit();
  manifest.commit();
  return rec;
}

}  // namespace mesospin
