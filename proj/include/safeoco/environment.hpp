#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "safeoco/exploration.hpp"
#include "safeoco/geometry.hpp"
#include "safeoco/projection.hpp"
#include "safeoco/rng.hpp"

namespace safeoco {

/// Fixed column order of every price matrix.
inline constexpr std::array<const char*, 5> kLbmpZones = {"Genesee", "Central", "North",
                                                          "Mohawk Valley", "West"};

/// Hourly zonal electricity prices, one row per timestamp, columns in
/// kLbmpZones order, rows ascending in time.
struct PriceTable {
  Matrix prices;                        // rows x 5, $/MWh
  std::vector<std::string> timestamps;  // ISO-8601, same length as rows
  bool synthetic = false;               // true when generated, not loaded
};

/// Loads `timestamp,zone,lbmp_usd_per_mwh` rows (header required, zone names
/// case-insensitive). Rows may arrive in any order; the result is sorted by
/// timestamp. Malformed rows raise ParseError with the 1-based line number;
/// duplicate (timestamp, zone) pairs and timestamps missing any of the five
/// zones raise DataError.
PriceTable load_lbmp_csv(const std::string& path);

/// Seeded fallback when no price file is supplied: Uniform[10, 100] per
/// zone-hour, hourly timestamps from 2024-01-01T00:00:00. Flagged synthetic.
PriceTable synthetic_lbmp(int rows, std::uint64_t seed);

enum class ScenarioKind { f1_linear, f2_quadratic, f3_resource, datacenter };

const char* scenario_kind_name(ScenarioKind kind);

/// A full horizon of cost functions f_1..f_T with all randomness drawn at
/// construction, so instances are immutable and safe to share across runs.
/// Steps t are 1-based throughout.
class Scenario {
 public:
  /// f_t(x) = c_t * sum(x) + 1 with c_t ~ Uniform[c_lower, c_upper].
  static Scenario make_f1(std::uint64_t seed, double c_lower, double c_upper, int dim,
                          int horizon);

  /// f_t(x) = 0.5 * ||x - c_t * x_bar||^2 with ||x_bar|| = 2.5 fixed per seed.
  /// The gradient bound is taken over the corners of the given box.
  static Scenario make_f2(std::uint64_t seed, double c_lower, double c_upper, int dim, int horizon,
                          const AmbientSet& box);

  /// f_t(x) = c_t . x with c_t = c1 + c2 + c3: c1 ~ U[-t^0.1, t^0.1] and
  /// c2 ~ U[-1, 0] per coordinate, c3 = (-1)^{p(t)} * 1 for a seeded random
  /// permutation p of [1, horizon].
  static Scenario make_f3(std::uint64_t seed, int dim, int horizon);

  /// f_t(x) = c_t . x + lambda_dc * (100 - sum_k 8 log(1 + 4 x_k)) with c_t
  /// the t-th price row; domain is the (nonnegative) box, which also sets the
  /// gradient bound.
  static Scenario make_datacenter(const PriceTable& prices, double lambda_dc, int horizon,
                                  const AmbientSet& box);

  ScenarioKind kind() const { return kind_; }
  const char* kind_name() const { return scenario_kind_name(kind_); }
  int dim() const { return dim_; }
  int horizon() const { return horizon_; }
  /// Declared upper bound on ||grad f_t(x)|| over the domain box and all t.
  double grad_bound() const { return grad_bound_; }
  bool synthetic_prices() const { return synthetic_prices_; }

  double value(int t, const VectorRef& x) const;
  Vector gradient(int t, const VectorRef& x) const;

  /// Mean of f_1..f_t. Same minimizers as the prefix sum; the mean keeps
  /// gradients horizon-free so one optimizer tolerance fits every t.
  ConvexObjective prefix_objective(int t) const { return range_objective(1, t); }

  /// Mean of f_{t_begin}..f_{t_end} (inclusive, 1-based).
  ConvexObjective range_objective(int t_begin, int t_end) const;

 private:
  Scenario() = default;
  void check_step(int t) const;
  void check_dim(const VectorRef& x) const;

  ScenarioKind kind_ = ScenarioKind::f1_linear;
  int dim_ = 0;
  int horizon_ = 0;
  double grad_bound_ = 0.0;
  double lambda_dc_ = 0.0;
  bool synthetic_prices_ = false;
  Vector c_;          // per-step scalar coefficient (f1, f2)
  Vector c_prefix_;   // running sums of c_
  Vector c2_prefix_;  // running sums of c_^2 (f2 constant term)
  Vector x_bar_;      // f2 target direction, norm 2.5
  Matrix coeff_;      // per-step coefficient rows (f3, datacenter)
  Matrix coeff_prefix_;
};

/// The simulated world: true constraints, the baseline action, and the noisy
/// observation channel y = Ax + w. This is the only component (besides
/// verification) allowed to touch the true polytope.
class Environment {
 public:
  /// Validates that the baseline is strictly feasible and inside the box.
  Environment(TruePolytope polytope, AmbientSet ambient, Vector baseline_action, double noise_std,
              std::uint64_t rng_seed);

  const TruePolytope& true_polytope() const { return polytope_; }
  const AmbientSet& ambient() const { return ambient_; }
  const BaselineSpec& baseline() const { return baseline_; }
  double noise_std() const { return noise_std_; }
  int dim() const { return polytope_.dim(); }
  int rows() const { return polytope_.rows(); }

  /// y = Ax + w, w ~ N(0, noise_std^2 I) from the environment's own stream.
  Vector observe(const VectorRef& x);

  /// Strict check against the unknown rows: any negative margin counts.
  bool violates(const VectorRef& x) const;

 private:
  TruePolytope polytope_;
  AmbientSet ambient_;
  BaselineSpec baseline_;
  double noise_std_;
  Rng rng_;
};

}  // namespace safeoco
