#include "safeoco/sopgd.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "safeoco/errors.hpp"
#include "safeoco/rng.hpp"

namespace safeoco {

namespace {
constexpr std::uint64_t kZetaTag = 0x7a657461;  // exploration perturbation stream
}

long long explore_steps_for(long long horizon) {
  if (horizon < 1) throw InvalidInputError("explore_steps_for: horizon must be positive");
  // smallest k with k^3 >= horizon^2, adjusted in exact integer arithmetic
  const __int128 t2 = static_cast<__int128>(horizon) * horizon;
  const auto cube = [](long long v) { return static_cast<__int128>(v) * v * v; };
  long long k = static_cast<long long>(
      std::cbrt(static_cast<double>(horizon) * static_cast<double>(horizon)));
  k = std::max<long long>(k - 2, 1);
  while (cube(k) < t2) ++k;
  while (k > 1 && cube(k - 1) >= t2) --k;
  return k;
}

double resolve_gamma(const BaselineSpec& baseline, const VectorRef& offsets,
                     double row_norm_bound, double perturbation_radius, const AmbientSet& box) {
  const double gap_rule = compute_gamma(baseline.safety_gap, row_norm_bound);
  const double rows = row_gamma_cap(baseline.image, offsets, row_norm_bound, perturbation_radius);
  const double corners = box_gamma_cap(baseline.action, perturbation_radius, box);
  return std::min({gap_rule, rows, corners});
}

Tuning resolve_tuning(const RunConfig& cfg, const Environment& env, const Scenario& scenario) {
  if (cfg.horizon < 1) throw ConfigError("run: horizon must be positive");
  if (scenario.horizon() < cfg.horizon)
    throw ConfigError("run: scenario covers " + std::to_string(scenario.horizon()) +
                      " steps, horizon needs " + std::to_string(cfg.horizon));
  if (scenario.dim() != env.dim())
    throw ConfigError("run: scenario and environment dimensions differ");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("run: delta must be in (0, 1)");
  if (!(cfg.ridge > 0.0)) throw ConfigError("run: ridge must be positive");

  Tuning tn;
  tn.horizon = cfg.horizon;
  tn.delta = cfg.delta;
  tn.ridge = cfg.ridge;
  tn.norm_bound = cfg.norm_bound.value_or(env.ambient().norm_bound);
  tn.grad_bound = cfg.grad_bound.value_or(scenario.grad_bound());
  tn.row_norm_bound = cfg.row_norm_bound.value_or(env.true_polytope().max_row_norm());
  tn.noise_r = cfg.noise_r.value_or(env.noise_std());
  if (!(tn.norm_bound > 0.0) || !(tn.grad_bound > 0.0) || !(tn.row_norm_bound > 0.0))
    throw ConfigError("run: norm, gradient and row-norm bounds must be positive");
  if (!(tn.noise_r >= 0.0)) throw ConfigError("run: noise parameter must be nonnegative");

  tn.explore_steps = cfg.explore_override.value_or(explore_steps_for(cfg.horizon));
  if (tn.explore_steps < 1) throw ConfigError("run: need at least one exploration step");
  if (tn.explore_steps >= cfg.horizon)
    throw ConfigError("run: exploration (" + std::to_string(tn.explore_steps) +
                      " steps) covers the whole horizon " + std::to_string(cfg.horizon));
  tn.step_size = cfg.step_override.value_or(
      2.0 * tn.norm_bound / (tn.grad_bound * std::sqrt(static_cast<double>(cfg.horizon))));
  if (!(tn.step_size > 0.0) || !std::isfinite(tn.step_size))
    throw ConfigError("run: step size must be positive and finite");

  const int d = env.dim();
  const int m = env.rows();
  tn.perturbation_radius = std::min(1.0, tn.norm_bound);
  tn.sigma_zeta_sq = tn.perturbation_radius * tn.perturbation_radius / d;
  tn.gamma = resolve_gamma(env.baseline(), env.true_polytope().b, tn.row_norm_bound,
                           tn.perturbation_radius, env.ambient());
  if (!(tn.gamma > 0.0)) throw ConfigError("run: resolved exploration weight is zero");
  tn.beta_explore = confidence_radius(tn.noise_r, d, tn.explore_steps, tn.norm_bound, tn.ridge,
                                      tn.delta, m, tn.row_norm_bound);
  tn.beta_horizon = confidence_radius(tn.noise_r, d, tn.horizon, tn.norm_bound, tn.ridge, tn.delta,
                                      m, tn.row_norm_bound);

  const double drive = tn.gamma * tn.gamma * tn.sigma_zeta_sq;
  const double l2 = tn.norm_bound * tn.norm_bound;
  const double chernoff = 8.0 * l2 / drive * std::log(d / tn.delta);
  tn.t0_min_chernoff = static_cast<long long>(std::ceil(std::max(chernoff, 0.0)));
  const double gap = env.baseline().safety_gap;
  const double theorem =
      8.0 * tn.beta_horizon * tn.beta_horizon * l2 / (drive * gap * gap);
  tn.t0_min_theorem = static_cast<long long>(std::ceil(theorem));
  tn.horizon_ok = tn.explore_steps >= tn.t0_min_theorem;
  return tn;
}

std::vector<long long> default_checkpoints(long long horizon, int count) {
  if (horizon < 1) throw InvalidInputError("default_checkpoints: horizon must be positive");
  count = std::max(count, 2);
  std::vector<long long> pts;
  pts.reserve(count);
  const double span = std::log(static_cast<double>(horizon));
  for (int k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / (count - 1);
    long long t = std::llround(std::exp(f * span));
    pts.push_back(std::clamp<long long>(t, 1, horizon));
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

ExplorationLog run_exploration(Environment& env, long long steps, double gamma,
                               double perturbation_radius, std::uint64_t rng_seed) {
  if (steps < 1) throw InvalidInputError("run_exploration: need at least one step");
  const int d = env.dim();
  ExplorationLog log;
  log.actions.resize(steps, d);
  log.observations.resize(steps, env.rows());
  Rng rng(mix_seed(rng_seed, kZetaTag));
  const Vector& xs = env.baseline().action;
  for (long long t = 0; t < steps; ++t) {
    const Vector zeta = sample_perturbation(rng, d, perturbation_radius);
    const Vector x = exploration_action(xs, gamma, zeta);
    log.actions.row(t) = x.transpose();
    log.observations.row(t) = env.observe(x).transpose();
  }
  return log;
}

Vector ogd_step(const Vector& x, const Vector& grad, double eta, const ConservativeSafeSet& set,
                double eps_opt) {
  ProjectionOptions opt;
  opt.eps_opt = eps_opt;
  opt.warm_start = &x;
  return project_conservative(set, x - eta * grad, opt).point;
}

RegretTrace run_sopgd(const RunConfig& cfg, Environment& env, const Scenario& scenario) {
  const auto t_start = std::chrono::steady_clock::now();
  RegretTrace trace;
  trace.tuning = resolve_tuning(cfg, env, scenario);
  const Tuning& tn = trace.tuning;
  const TruePolytope& truth = env.true_polytope();
  const AmbientSet& box = env.ambient();
  const int d = env.dim();

  std::vector<long long> schedule =
      cfg.checkpoints.empty() ? default_checkpoints(tn.horizon) : cfg.checkpoints;
  for (long long t : schedule)
    if (t < 1 || t > tn.horizon)
      throw ConfigError("run: checkpoint " + std::to_string(t) + " outside [1, " +
                        std::to_string(tn.horizon) + "]");
  schedule.push_back(tn.explore_steps);
  schedule.push_back(std::min(2 * tn.explore_steps, tn.horizon));
  schedule.push_back(tn.horizon);
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());

  double cum_cost = 0.0;
  long long violations = 0;
  size_t next_cp = 0;
  const auto note_step = [&](long long t, bool explore, const Vector& x) {
    cum_cost += scenario.value(static_cast<int>(t), x);
    if (env.violates(x)) ++violations;
    if (next_cp < schedule.size() && schedule[next_cp] == t) {
      CheckpointRow row;
      row.t = t;
      row.explore_phase = explore;
      row.cum_cost = cum_cost;
      row.violations = violations;
      trace.checkpoints.push_back(row);
      ++next_cp;
    }
  };

  // Phase 1: safe exploration around the baseline.
  trace.exploration =
      run_exploration(env, tn.explore_steps, tn.gamma, tn.perturbation_radius, cfg.rng_seed);
  for (long long t = 1; t <= tn.explore_steps; ++t)
    note_step(t, true, trace.exploration.actions.row(t - 1).transpose());

  // One fit, then the conservative set the whole optimize phase projects onto.
  trace.estimate = fit_rls(trace.exploration, tn.ridge);
  trace.summary.lambda_min =
      Eigen::SelfAdjointEigenSolver<Matrix>(trace.estimate.gram).eigenvalues().minCoeff();
  trace.beta_used = cfg.known_set_ablation ? 0.0 : tn.beta_explore;

  std::optional<ConservativeSafeSet> set;
  if (cfg.known_set_ablation) {
    RlsEstimate exact;
    exact.a_hat = truth.A;
    exact.gram = Matrix::Identity(d, d);
    exact.gram_chol = Matrix::Identity(d, d);
    exact.ridge = tn.ridge;
    set.emplace(std::move(exact), 0.0, truth.b, box);
  } else {
    set.emplace(trace.estimate, tn.beta_explore, truth.b, box);
  }

  // Phase 2: projected gradient descent inside the conservative set.
  try {
    ProjectionOptions opt;
    opt.eps_opt = cfg.eps_opt;
    Vector x = project_conservative(
                   *set, trace.exploration.actions.row(tn.explore_steps - 1).transpose(), opt)
                   .point;
    for (long long t = tn.explore_steps + 1; t <= tn.horizon; ++t) {
      note_step(t, false, x);
      if (t == tn.horizon) break;
      x = ogd_step(x, scenario.gradient(static_cast<int>(t), x), tn.step_size, *set, cfg.eps_opt);
    }
  } catch (const std::exception& e) {
    trace.summary.aborted = true;
    trace.summary.abort_reason = e.what();
  }

  // Post-pass: regrets at the checkpoints actually reached. The prefix
  // optimum is recomputed per checkpoint, warm-started from the previous one.
  try {
    Vector warm;
    Vector x_star_horizon;
    for (CheckpointRow& row : trace.checkpoints) {
      const ConvexObjective obj = scenario.prefix_objective(static_cast<int>(row.t));
      const Vector x_star =
          hindsight_optimum(obj, truth, box, 1e-8, warm.size() == d ? &warm : nullptr);
      row.regret_prefix = row.cum_cost - row.t * obj.value(x_star);
      row.regret_over_t = row.regret_prefix / row.t;
      row.regret_over_t23 =
          row.regret_prefix / std::pow(static_cast<double>(row.t), 2.0 / 3.0);
      warm = x_star;
      if (row.t == tn.horizon) x_star_horizon = x_star;
    }
    if (x_star_horizon.size() == 0) x_star_horizon = warm;  // aborted before T
    if (x_star_horizon.size() == d) {
      for (CheckpointRow& row : trace.checkpoints) {
        const ConvexObjective obj = scenario.prefix_objective(static_cast<int>(row.t));
        row.regret_fixed = row.cum_cost - row.t * obj.value(x_star_horizon);
      }
    }
  } catch (const std::exception& e) {
    if (!trace.summary.aborted) {
      trace.summary.aborted = true;
      trace.summary.abort_reason = std::string("regret accounting: ") + e.what();
    }
  }

  trace.summary.violations = violations;
  if (!trace.checkpoints.empty()) {
    trace.summary.final_regret_prefix = trace.checkpoints.back().regret_prefix;
    trace.summary.final_regret_fixed = trace.checkpoints.back().regret_fixed;
  }
  trace.summary.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return trace;
}

}  // namespace safeoco
