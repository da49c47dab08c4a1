// mesospin: command-line runner for the experiments in mesospin/experiments.hpp.
//
// Exit status: 0 when every invariant the run checks held, 2 when the run
// finished but an invariant failed, 1 on a configuration or runtime error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mesospin/experiments.hpp"

using namespace mesospin;

namespace {

struct Global {
  int threads = 1;
  std::string out_dir = ".";
};

int report(const RunRecord& r) {
  std::cout << "wrote " << r.output.string() << " and " << r.manifest.string() << " in " << r.runtime_seconds
            << " s\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  int failed = 0;
  for (const auto& i : r.invariants)
    if (!i.ok) {
      std::cerr << "invariant failed: " << i.name << (i.detail.empty() ? "" : " [" + i.detail + "]") << "\n";
      ++failed;
    }
  if (failed) {
    std::cerr << failed << " of " << r.invariants.size() << " invariants failed\n";
    return 2;
  }
  return 0;
}

int execute(const Config& c, const Global& g) {
  set_thread_count(g.threads);
  return report(run(c, RunOptions{g.out_dir}));
}

/// Sets key from an option only if it was given.
void put(Config& c, const std::string& key, const CLI::Option* opt, const std::string& value) {
  if (opt->count() > 0) c.set(key, value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact simulation of qubit entanglement through a mesoscopic spin system"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--threads", g.threads, "worker threads for parameter grids (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "directory for relative output paths");

  // magnify
  auto* mag = app.add_subcommand("magnify", "branch spectra after one magnification circuit");
  std::string protocol, dims, coupling = "dipolar", t, dt, reps, out;
  mag->add_option("--protocol", protocol, "xy | gr")->required();
  mag->add_option("--dims", dims, "lattice shape, e.g. 12 or 4x5")->required();
  mag->add_option("--coupling", coupling, "dipolar | nn")->capture_default_str();
  auto* mag_t = mag->add_option("--t", t, "GR evolution time, e.g. 2pi*Nh");
  auto* mag_dt = mag->add_option("--dt", dt, "XY step, e.g. pi/a12");
  auto* mag_reps = mag->add_option("--reps", reps, "XY rounds r");
  mag->add_option("--out", out, "CSV path")->required();

  // fidelity
  auto* fid = app.add_subcommand("fidelity", "post-selected two-qubit state for partially polarized halves");
  std::string eps, slope = "auto";
  fid->add_option("--dims", dims, "shape of each half")->required();
  fid->add_option("--coupling", coupling, "dipolar | nn")->capture_default_str();
  fid->add_option("--t", t, "GR evolution time")->required();
  fid->add_option("--eps", eps, "polarization parameter(s), list or start:step:stop")->required();
  fid->add_option("--theta-slope", slope, "auto | <real>")->capture_default_str();
  fid->add_option("--out", out, "CSV path")->required();

  // negativity-sweep
  auto* neg = app.add_subcommand("negativity-sweep", "qubit-MSS log negativity against eps");
  neg->add_option("--dims", dims, "MSS shape (at most 11 spins)")->required();
  neg->add_option("--coupling", coupling, "dipolar | nn")->capture_default_str();
  neg->add_option("--t", t, "GR evolution time")->required();
  neg->add_option("--eps-grid", eps, "eps values")->required();
  neg->add_option("--out", out, "CSV path")->required();

  // loss-ep
  auto* loss = app.add_subcommand("loss-ep", "entanglement of projection after losing one spin");
  std::string t_grid;
  loss->add_option("--dims", dims, "MSS shape")->required();
  loss->add_option("--coupling", coupling, "dipolar | nn")->capture_default_str();
  loss->add_option("--t-grid", t_grid, "GR times")->required();
  loss->add_option("--out", out, "CSV path")->required();

  // extrapolate
  auto* ext = app.add_subcommand("extrapolate", "binomial extrapolation of fidelity and populations");
  std::string n_grid;
  ext->add_option("--n-grid", n_grid, "total N values")->required();
  ext->add_option("--eps-grid", eps, "eps values")->required();
  ext->add_option("--theta-slope", slope, "auto | <real>")->capture_default_str();
  ext->add_option("--out", out, "CSV path")->required();

  // run
  auto* runc = app.add_subcommand("run", "run a named experiment from a config file");
  std::string config_path;
  std::vector<std::string> overrides;
  bool validate_only = false;
  runc->add_option("--config", config_path, "key = value file")->required()->check(CLI::ExistingFile);
  runc->add_option("--set", overrides, "override, key=value (repeatable)");
  runc->add_flag("--validate", validate_only, "check the configuration and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    Config c;
    if (*mag) {
      const auto proto = parse_protocol(protocol);
      c.set("experiment", proto == Protocol::GROneTime ? "spectra_gr" : "spectra_xy");
      c.set("dims", dims);
      c.set("coupling", coupling);
      if (proto == Protocol::GROneTime) {
        if (mag_dt->count() || mag_reps->count()) throw ConfigError("--dt/--reps belong to the xy protocol");
        put(c, "t", mag_t, t);
      } else {
        if (mag_t->count()) throw ConfigError("--t belongs to the gr protocol");
        put(c, "dt", mag_dt, dt);
        put(c, "reps", mag_reps, reps);
      }
      c.set("out", out);
    } else if (*fid) {
      c.set("experiment", "mixed_fidelity");
      c.set("dims", dims);
      c.set("coupling", coupling);
      c.set("t", t);
      c.set("eps_grid", eps);
      c.set("theta_slope", slope);
      c.set("out", out);
    } else if (*neg) {
      c.set("experiment", "negativity_sweep");
      c.set("dims", dims);
      c.set("coupling", coupling);
      c.set("t", t);
      c.set("eps_grid", eps);
      c.set("out", out);
    } else if (*loss) {
      c.set("experiment", "loss_ep");
      c.set("dims", dims);
      c.set("coupling", coupling);
      c.set("t_grid", t_grid);
      c.set("out", out);
    } else if (*ext) {
      c.set("experiment", "extrapolate");
      c.set("n_grid", n_grid);
      c.set("eps_grid", eps);
      c.set("theta_slope", slope);
      c.set("out", out);
    } else if (*runc) {
      c = Config::from_file(config_path);
      for (const auto& kv : overrides) c.apply_override(kv);
      if (validate_only) {
        validate(c);
        std::cout << "configuration ok: " << to_string(c.experiment()) << "\n";
        return 0;
      }
    }
    return execute(c, g);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
