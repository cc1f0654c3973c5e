#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safeoco/environment.hpp"
#include "safeoco/estimation.hpp"
#include "safeoco/projection.hpp"

namespace safeoco {

/// Parameters of one run. Unset bounds resolve from the environment and the
/// scenario: those are exactly the constants the problem model declares known
/// (ambient norm bound, gradient bound, row-norm bound, noise parameter).
struct RunConfig {
  long long horizon = 100000;                 // T
  std::optional<long long> explore_override;  // forces T0
  std::optional<double> step_override;        // forces the OGD step size
  double delta = 1e-3;                        // failure probability
  double ridge = 0.5;                         // regularization weight
  std::optional<double> norm_bound;           // L
  std::optional<double> grad_bound;           // G
  std::optional<double> row_norm_bound;       // L_A
  std::optional<double> noise_r;              // R
  std::uint64_t rng_seed = 0;
  std::vector<long long> checkpoints;  // empty: ~200 log-spaced points
  bool known_set_ablation = false;     // phase 2 against the true rows, beta 0
  double eps_opt = 1e-8;               // phase-2 projection accuracy
};

/// All constants a run derives from its config before the first action.
struct Tuning {
  long long horizon = 0;        // T
  long long explore_steps = 0;  // T0 = ceil(T^{2/3}) unless overridden
  double step_size = 0.0;       // eta = 2L/(G sqrt(T)) unless overridden
  double norm_bound = 0.0;
  double grad_bound = 0.0;
  double row_norm_bound = 0.0;
  double noise_r = 0.0;
  double delta = 0.0;
  double ridge = 0.0;
  double gamma = 0.0;                // mixing weight after every safety cap
  double perturbation_radius = 0.0;  // min(1, L)
  double sigma_zeta_sq = 0.0;        // radius^2 / d
  double beta_explore = 0.0;         // confidence radius at T0 (builds the set)
  double beta_horizon = 0.0;         // confidence radius at T (theory condition)
  long long t0_min_chernoff = 0;  // smallest T0 for the eigenvalue bound
  long long t0_min_theorem = 0;   // smallest T0 for the regret theorem
  bool horizon_ok = false;        // explore_steps >= t0_min_theorem
};

/// Smallest integer k with k^3 >= t^2, computed exactly in integers.
long long explore_steps_for(long long horizon);

/// The gap-rule gamma capped by the per-row and ambient-box worst cases.
double resolve_gamma(const BaselineSpec& baseline, const VectorRef& offsets,
                     double row_norm_bound, double perturbation_radius, const AmbientSet& box);

/// Resolves every derived constant; throws ConfigError when T0 >= T.
Tuning resolve_tuning(const RunConfig& cfg, const Environment& env, const Scenario& scenario);

/// Default checkpoint schedule: ~count log-spaced steps in [1, horizon].
std::vector<long long> default_checkpoints(long long horizon, int count = 200);

/// Phase 1 alone: steps actions x_t = (1-gamma) x^s + gamma zeta_t with their
/// noisy observations. Used by the full run and by the statistical checks.
ExplorationLog run_exploration(Environment& env, long long steps, double gamma,
                               double perturbation_radius, std::uint64_t rng_seed);

/// One OGD update x_{t+1} = Pi(x_t - eta grad), warm-started at x_t.
Vector ogd_step(const Vector& x, const Vector& grad, double eta, const ConservativeSafeSet& set,
                double eps_opt = 1e-8);

struct CheckpointRow {
  long long t = 0;
  bool explore_phase = false;
  double cum_cost = 0.0;
  double regret_prefix = 0.0;    // vs the prefix hindsight optimum x*(t)
  double regret_fixed = 0.0;     // vs the horizon optimum x*(T)
  double regret_over_t = 0.0;    // regret_prefix / t
  double regret_over_t23 = 0.0;  // regret_prefix / t^{2/3}
  long long violations = 0;      // true-constraint violations so far
};

struct RunSummary {
  long long violations = 0;
  double final_regret_prefix = 0.0;
  double final_regret_fixed = 0.0;
  double lambda_min = 0.0;  // smallest eigenvalue of the fitted Gram matrix
  double wallclock_seconds = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

struct RegretTrace {
  Tuning tuning;
  std::vector<CheckpointRow> checkpoints;
  ExplorationLog exploration;
  RlsEstimate estimate;
  double beta_used = 0.0;  // 0 in the known-set ablation
  RunSummary summary;
};

/// The full algorithm: safe exploration, one least-squares fit, conservative
/// set construction, then projected gradient descent. Solver failures mark
/// the trace aborted (with the partial checkpoint rows) instead of throwing.
RegretTrace run_sopgd(const RunConfig& cfg, Environment& env, const Scenario& scenario);

}  // namespace safeoco
