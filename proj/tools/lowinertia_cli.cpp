// Command-line front end for the low-inertia system simulator.
//
//   lowinertia run <scenario>                 simulate, write trace + metrics CSV
//   lowinertia sweep <scenario> --dp-...      disturbance sweep, write sweep CSV
//   lowinertia reduced-study [--pmax ...]     aggregate-model interpolation study
//   lowinertia tuning --dp <value>            sharing-matched gains for all strategies
//   lowinertia presets                        list the built-in scenario catalog
//
// <scenario> is a JSON file path or a preset name. Exit codes for `run`:
// 0 stable, 2 dc collapse, 3 divergent; other subcommands return 0 on success,
// 1 on usage or validation errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <lowinertia/csv.hpp>
#include <lowinertia/scenario.hpp>

namespace {

using namespace lowinertia;

Scenario resolve_scenario(const std::string& arg) {
  if (std::filesystem::exists(arg)) return load_scenario(arg);
  for (const auto& name : preset_names())
    if (name == arg) return preset_scenario(arg);
  std::string msg = "'" + arg + "' is neither a scenario file nor a preset; presets are:";
  for (const auto& name : preset_names()) msg += "\n  " + name;
  throw ScenarioError(msg);
}

std::filesystem::path prepare_out_dir(const std::string& out) {
  std::filesystem::path dir = out.empty() ? "." : out;
  std::filesystem::create_directories(dir);
  return dir;
}

void apply_overrides(Scenario& sc, double dt, double t_end) {
  if (dt > 0.0) sc.solver.dt = dt;
  if (t_end > 0.0) sc.solver.t_end = t_end;
}

int cmd_run(const std::string& scenario_arg, double dt, double t_end, const std::string& out) {
  Scenario sc = resolve_scenario(scenario_arg);
  apply_overrides(sc, dt, t_end);
  const auto dir = prepare_out_dir(out);

  const ScenarioResult r = run_scenario(sc);

  const std::vector<std::string>& selection =
      sc.outputs.empty() ? r.run.trace.channel_names : sc.outputs;
  const auto trace_path = dir / (sc.name + "_trace.csv");
  const auto metrics_path = dir / (sc.name + "_metrics.csv");
  write_trace_csv(r.run.trace, selection, trace_path.string());
  write_metrics_csv(r.metrics, metrics_path.string());

  std::cout << sc.name << ": " << to_string(r.run.classification) << " (t_final = "
            << csv_number(r.run.t_final) << " s)\n";
  if (!sc.events.empty() && r.run.classification == SystemClass::stable)
    std::cout << "  nadir = " << csv_number(r.metrics.nadir)
              << " pu, rocof = " << csv_number(r.metrics.rocof) << " pu/s (window 0.25 s)\n";
  std::cout << "  trace:   " << trace_path.string() << "\n"
            << "  metrics: " << metrics_path.string() << "\n";
  return r.exit_code;
}

int cmd_sweep(const std::string& scenario_arg, double dp_start, double dp_end, double dp_step,
              double dt, double t_end, const std::string& out) {
  Scenario tmpl = resolve_scenario(scenario_arg);
  apply_overrides(tmpl, dt, t_end);

  int step_index = -1;
  for (std::size_t i = 0; i < tmpl.events.size(); ++i)
    if (tmpl.events[i].type == ScenarioEvent::Type::load_step) {
      step_index = static_cast<int>(i);
      break;
    }
  if (step_index < 0) throw ScenarioError("sweep: scenario has no load_step event to vary");
  if (!(dp_step > 0.0) || dp_end < dp_start)
    throw ScenarioError("sweep: need --dp-start <= --dp-end and --dp-step > 0");

  SweepSpec spec;
  for (double dp = dp_start; dp <= dp_end + 1e-12; dp += dp_step) spec.dp_values.push_back(dp);
  spec.event_time = tmpl.events[step_index].time;

  int fc = -1;
  {  // the pre-event operating point sets the frequency reference
    BuiltScenario built = build_scenario(tmpl);
    PowerSystem sys(built.topology, built.specs);
    sys.initialize();
    spec.w_star = sys.initial_speed();
    fc = sys.frequency_channel();
  }

  const auto points = run_sweep(spec, [&](double dp) {
    Scenario sc = tmpl;
    sc.events[step_index].delta_p = dp;
    const ScenarioResult r = run_scenario(sc);
    SweepSample sample;
    sample.time = r.run.trace.time;
    sample.omega = r.run.trace.values[fc];
    sample.classification = r.run.classification;
    return sample;
  });

  const auto dir = prepare_out_dir(out);
  const auto sweep_path = dir / (tmpl.name + "_sweep.csv");
  write_sweep_csv(points, sweep_path.string());

  int stable = 0;
  for (const auto& pt : points) stable += pt.metrics.stable == SystemClass::stable;
  std::cout << tmpl.name << ": swept " << points.size() << " disturbances ("
            << sweep_worker_count(points.size()) << " workers), " << stable << " stable\n";
  if (stable > 0)
    std::cout << "  max nadir/|dp| = " << csv_number(max_normalized_nadir(points))
              << ", max rocof/|dp| = " << csv_number(max_normalized_rocof(points)) << "\n";
  std::cout << "  sweep: " << sweep_path.string() << "\n";
  return 0;
}

int cmd_reduced_study(double p_max, double p_d, int points, const std::string& out) {
  InterpolationConfig cfg;
  cfg.p_max = p_max;
  cfg.p_d = p_d;
  const auto grid = interpolation_grid(points);
  const auto study = interpolation_study(cfg, grid);

  const auto dir = prepare_out_dir(out);
  const auto path = dir / "reduced_study.csv";
  write_interpolation_csv(study, path.string());

  std::cout << "aggregate-model interpolation, p_d = " << csv_number(p_d) << " pu, p_max = "
            << csv_number(p_max) << " pu\n";
  std::cout << "  nu = 1 anchor: rocof 100%, nadir 100%\n";
  const auto& last = study.back();
  std::cout << "  nu = " << csv_number(last.nu) << ": rocof " << csv_number(last.rocof_pct)
            << "%, nadir " << csv_number(last.nadir_pct) << "%\n";
  std::cout << "  study: " << path.string() << "\n";
  return 0;
}

int cmd_tuning(double d_p) {
  const EquivalentGains g = compute_equivalent_gains(d_p);
  std::cout << "gains matching a governor droop gain d_p = " << csv_number(d_p)
            << " (equal steady-state sharing):\n"
            << "  droop     d_omega = " << csv_number(g.d_omega) << "\n"
            << "  vsm       d_p     = " << csv_number(g.d_p_vsm) << "\n"
            << "  matching  k_dc    = " << csv_number(g.k_dc) << "\n"
            << "  dvoc      eta     = " << csv_number(g.eta) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-domain simulator for mixed machine/converter power systems"};
  app.require_subcommand(1);
  app.fallthrough();  // let the global flags appear after the subcommand name

  double dt = 0.0, t_end = 0.0;
  std::string out = ".";
  long seed = 0;  // accepted for interface stability; the simulator is deterministic
  app.add_option("--dt", dt, "integration step override, s");
  app.add_option("--t-end", t_end, "horizon override, s");
  app.add_option("--out", out, "output directory for CSV files");
  app.add_option("--seed", seed, "reserved; runs are deterministic");

  auto* run = app.add_subcommand("run", "simulate one scenario");
  std::string run_scenario_arg;
  run->add_option("scenario", run_scenario_arg, "scenario file or preset name")->required();

  auto* sweep = app.add_subcommand("sweep", "metrics over a range of load steps");
  std::string sweep_scenario_arg;
  double dp_start = 0.2, dp_end = 0.893, dp_step = 0.007;
  sweep->add_option("scenario", sweep_scenario_arg, "scenario file or preset name")->required();
  sweep->add_option("--dp-start", dp_start, "first load step, pu");
  sweep->add_option("--dp-end", dp_end, "last load step, pu");
  sweep->add_option("--dp-step", dp_step, "load step increment, pu");

  auto* reduced = app.add_subcommand("reduced-study", "aggregate-model interpolation study");
  double p_max = std::numeric_limits<double>::infinity();
  double p_d = 1.42;
  int points = 20;
  reduced->add_option("--pmax", p_max, "dc power limit, pu (default: unlimited)");
  reduced->add_option("--pd", p_d, "disturbance size, pu");
  reduced->add_option("--points", points, "grid resolution")->check(CLI::PositiveNumber);

  auto* tuning = app.add_subcommand("tuning", "sharing-matched gains for every strategy");
  double tuning_dp = 0.0;
  tuning->add_option("--dp", tuning_dp, "governor droop gain to match, pu")->required();

  auto* presets = app.add_subcommand("presets", "list built-in scenarios");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_scenario_arg, dt, t_end, out);
    if (sweep->parsed()) return cmd_sweep(sweep_scenario_arg, dp_start, dp_end, dp_step, dt, t_end, out);
    if (reduced->parsed()) return cmd_reduced_study(p_max, p_d, points, out);
    if (tuning->parsed()) return cmd_tuning(tuning_dp);
    if (presets->parsed()) {
      for (const auto& name : preset_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
