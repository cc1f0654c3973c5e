#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "safeoco/environment.hpp"
#include "safeoco/sopgd.hpp"
#include "safeoco/verification.hpp"

namespace safeoco {

/// Flat key-value config: `section.key = value` lines, `#` comments,
/// bracketed lists `[1, 2]` and matrices `[[1, 0], [0, 1]]` (which may span
/// lines until the brackets close). Later assignments to a key win.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  /// Typed getters; a malformed value raises ConfigError naming the key.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Vector get_vector(const std::string& key) const;               // key must exist
  Matrix get_matrix(const std::string& key) const;               // key must exist
  std::vector<long long> get_int_list(const std::string& key) const;  // key must exist

 private:
  std::map<std::string, std::string> values_;
};

/// Everything one experiment sweep needs: the run template, the world, the
/// scenario parameters, and the output protocol.
struct ExperimentSpec {
  std::string name = "experiment";
  RunConfig run;
  ScenarioKind kind = ScenarioKind::f1_linear;
  double c_lower = 0.5;
  double c_upper = 2.0;
  double lambda_dc = 5.7720;
  std::string prices_path;  // empty: seeded synthetic prices
  Matrix A;
  Vector b;
  Vector box_lower;
  Vector box_upper;
  Vector baseline_action;
  double noise_std = 0.0;
  int n_seeds = 6;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
};

/// Two-dimensional setup: axis rows with offsets 3, box [-3, 3]^2,
/// baseline (1, 0.5), noise std sqrt(1e-3).
ExperimentSpec preset_box();

/// Simplex-like setup: x1 + x2 <= 1, x >= 0 rows, box [0, 1]^2,
/// baseline (0.25, 0.25).
ExperimentSpec preset_triangle();

/// Five-zone scheduling setup: per-zone caps 30 plus a total budget of 26,
/// box [0, 30]^5, baseline (5, ..., 5), horizon 10^4.
ExperimentSpec preset_datacenter();

/// Builds a spec from `preset` (default box) plus per-key overrides.
ExperimentSpec spec_from_config(const Config& cfg);

ScenarioKind parse_scenario_kind(const std::string& name);

/// World and cost stream for one seeded realization of the experiment spec.
Environment make_environment(const ExperimentSpec& spec, std::uint64_t seed);
Scenario make_scenario(const ExperimentSpec& spec, std::uint64_t seed);

/// Loads spec.prices_path (trying SAFE_OCO_DATA_DIR for relative paths) or
/// generates the seeded synthetic table when the path is empty.
PriceTable resolve_prices(const ExperimentSpec& spec);

struct ExperimentSummary {
  int n_seeds = 0;
  int completed = 0;
  long long total_violations = 0;
  bool all_horizon_ok = true;
  std::string output_dir;
  std::vector<RunSummary> runs;
};

/// Runs n_seeds independent realizations (seed = master_seed + index) on up
/// to `threads` workers and writes traces, aggregates, plot data, exploration
/// scatter, vertices, estimate diagnostics and the summary CSV. Existing
/// files abort the sweep unless force is set.
ExperimentSummary run_experiment(const ExperimentSpec& spec, int threads, bool force, bool svg);

/// Aggregated regret-ratio band across traces sharing one schedule.
struct AggregateRow {
  long long t = 0;
  double rt_mean = 0, rt_min = 0, rt_max = 0;
  double rt23_mean = 0, rt23_min = 0, rt23_max = 0;
};

std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<CheckpointRow>>& traces);

/// Reads the checkpoint rows back from a trace CSV written by this harness.
std::vector<CheckpointRow> read_trace_csv(const std::string& path);

/// `plot` entry point: aggregate existing trace files into plot CSVs
/// (and optional SVG charts) under out_dir.
void emit_plot_data(const std::vector<std::string>& trace_paths, const std::string& out_dir,
                    bool force, bool svg);

struct VerifySummary {
  int seeds = 0;
  int coverage_hits = 0;
  int eigmin_hits = 0;
  long long nesting_violations_given_coverage = 0;
  long long naive_escapes = 0;  // informational: estimated polytope vs truth
  bool t0_chernoff_ok = true;
  bool t0_theorem_ok = true;
  bool all_ok = false;
};

/// Statistical lemma checks over seeded explorations; writes
/// verification.csv (check_name, seed, value, bound, holds) and a
/// human-readable report to stdout.
VerifySummary run_verification(const ExperimentSpec& spec, int n_seeds, long long n_samples,
                               const std::string& out_dir, bool force);

/// `inspect`: one seeded exploration + fit, dumped human-readably to stdout.
void inspect_estimate(const ExperimentSpec& spec, std::uint64_t seed);

}  // namespace safeoco
