// Command-line front end: run experiments, verify the safety lemmas on
// sampled instances, aggregate traces into plot data, inspect a single fit.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "safeoco/errors.hpp"
#include "safeoco/harness.hpp"

namespace {

safeoco::ExperimentSpec build_spec(const std::string& config_path, const std::string& preset) {
  std::string text;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw safeoco::ConfigError("cannot open config file: " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  // later assignments win, so appending lets the flag override the file
  if (!preset.empty()) text += "\npreset = " + preset + "\n";
  return safeoco::spec_from_config(safeoco::Config::from_string(text));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe online convex optimization under unknown linear constraints"};
  app.require_subcommand(1);

  std::string config_path, preset, out_dir, scenario;
  int seeds = 0, threads = 0;
  long long master_seed = 0, horizon = 0, explore_steps = 0, samples = 100000;
  std::uint64_t inspect_seed = 0;
  double step_size = 0.0;
  bool force = false, svg = false, ablation = false;
  std::vector<std::string> trace_paths;

  auto* run = app.add_subcommand("run", "run an experiment across seeds and write CSV traces");
  run->add_option("config", config_path, "config file (section.key = value lines)");
  run->add_option("--preset", preset, "base preset: box, triangle, datacenter");
  auto* o_seeds = run->add_option("--seeds", seeds, "number of independent runs");
  auto* o_master = run->add_option("--seed,--master-seed", master_seed, "seed of run 0");
  auto* o_out = run->add_option("--out", out_dir, "output directory");
  auto* o_horizon = run->add_option("--horizon", horizon, "total steps T");
  auto* o_explore = run->add_option("--explore-steps", explore_steps, "override the explore length");
  auto* o_step = run->add_option("--step-size", step_size, "override the gradient step size");
  auto* o_scenario = run->add_option("--scenario", scenario, "f1, f2, f3, or datacenter");
  run->add_option("--threads", threads, "worker threads (0 = auto)");
  run->add_flag("--ablation", ablation, "run with the true constraint set (no margin)");
  run->add_flag("--force", force, "overwrite existing outputs");
  run->add_flag("--svg", svg, "also write SVG charts");

  auto* verify = app.add_subcommand("verify", "sample exploration fits and check the guarantees");
  verify->add_option("config", config_path, "config file");
  verify->add_option("--preset", preset, "base preset: box, triangle, datacenter");
  auto* v_seeds = verify->add_option("--seeds", seeds, "number of sampled fits");
  auto* v_master = verify->add_option("--seed,--master-seed", master_seed, "seed of fit 0");
  auto* v_out = verify->add_option("--out", out_dir, "output directory");
  verify->add_option("--samples", samples, "membership samples per fit");
  verify->add_flag("--force", force, "overwrite existing outputs");

  auto* plot = app.add_subcommand("plot", "aggregate trace CSVs into band-plot data");
  plot->add_option("traces", trace_paths, "trace_seed*.csv files")->required();
  plot->add_option("--out", out_dir, "output directory")->required();
  plot->add_flag("--force", force, "overwrite existing outputs");
  plot->add_flag("--svg", svg, "also write SVG charts");

  auto* inspect = app.add_subcommand("inspect", "print one exploration fit against the truth");
  inspect->add_option("config", config_path, "config file");
  inspect->add_option("--preset", preset, "base preset: box, triangle, datacenter");
  auto* i_seed = inspect->add_option("--seed", inspect_seed, "run seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) {
      safeoco::ExperimentSpec spec = build_spec(config_path, preset);
      if (o_seeds->count()) spec.n_seeds = seeds;
      if (o_master->count()) spec.master_seed = static_cast<std::uint64_t>(master_seed);
      if (o_out->count()) spec.output_dir = out_dir;
      if (o_horizon->count()) spec.run.horizon = horizon;
      if (o_explore->count()) spec.run.explore_override = explore_steps;
      if (o_step->count()) spec.run.step_override = step_size;
      if (o_scenario->count()) spec.kind = safeoco::parse_scenario_kind(scenario);
      if (ablation) spec.run.known_set_ablation = true;
      const safeoco::ExperimentSummary summary = safeoco::run_experiment(spec, threads, force, svg);
      return (summary.completed == summary.n_seeds && summary.total_violations == 0) ? 0 : 1;
    }
    if (app.got_subcommand(verify)) {
      safeoco::ExperimentSpec spec = build_spec(config_path, preset);
      if (v_master->count()) spec.master_seed = static_cast<std::uint64_t>(master_seed);
      const int n = v_seeds->count() ? seeds : 100;
      const std::string dir = v_out->count() ? out_dir : spec.output_dir + "/verify";
      const safeoco::VerifySummary vs = safeoco::run_verification(spec, n, samples, dir, force);
      return vs.all_ok ? 0 : 1;
    }
    if (app.got_subcommand(plot)) {
      safeoco::emit_plot_data(trace_paths, out_dir, force, svg);
      return 0;
    }
    if (app.got_subcommand(inspect)) {
      safeoco::ExperimentSpec spec = build_spec(config_path, preset);
      const std::uint64_t seed = i_seed->count() ? inspect_seed : spec.master_seed;
      safeoco::inspect_estimate(spec, seed);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
