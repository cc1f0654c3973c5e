#pragma once

#include <functional>
#include <optional>

#include "safeoco/estimation.hpp"

namespace safeoco {

struct ProjectionResult {
  Vector point;
  double objective_gap;      // certified bound on 0.5||x - z||^2 suboptimality
  double feasibility_slack;  // max constraint value at point; <= 0 means feasible
  int iterations;            // total Newton steps
};

struct ProjectionOptions {
  double eps_opt = 1e-8;
  int max_outer = 200;
  int max_inner = 50;
  /// Strictly feasible hint; skips the feasibility phase when valid.
  const Vector* warm_start = nullptr;
};

/// Euclidean projection of z onto the conservative safe set, shrunk by the
/// strict-feasibility margin eps_feas = 1e-9 * max_i |b_i|. Damped-Newton
/// log-barrier method; the second-order term is smoothed as
/// sqrt(x^T V^-1 x + 1e-16). Returns z itself when z already satisfies the
/// shrunk constraints and the box.
ProjectionResult project_conservative(const ConservativeSafeSet& set, const VectorRef& z,
                                      const ProjectionOptions& opt = {});

/// Same solver on a plain polytope {Ax <= b} ∩ box (no second-order term).
ProjectionResult project_polytope(const TruePolytope& p, const AmbientSet& box, const VectorRef& z,
                                  const ProjectionOptions& opt = {});

/// Prefix-averaged convex cost packaged for hindsight optimization. Averaging
/// over the prefix length leaves the minimizer unchanged and keeps gradient
/// magnitudes horizon-free.
struct ConvexObjective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  /// Upper bound on the Hessian norm; 0 marks a linear objective.
  double smoothness = 0.0;
  /// Set for linear objectives; enables exact vertex enumeration.
  std::optional<Vector> linear_coefficients;
};

/// argmin of obj over {Ax <= b} ∩ box. Linear objectives are solved exactly by
/// vertex enumeration (d <= 3, lexicographic tie-break); smooth ones by
/// projected gradient descent with fixed step 1/smoothness, stopping when the
/// projected-gradient norm falls to eps_opt.
Vector hindsight_optimum(const ConvexObjective& obj, const TruePolytope& p, const AmbientSet& box,
                         double eps_opt = 1e-8, const Vector* warm_start = nullptr);

}  // namespace safeoco
