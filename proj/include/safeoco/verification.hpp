#pragma once

#include <functional>

#include "safeoco/estimation.hpp"
#include "safeoco/geometry.hpp"
#include "safeoco/rng.hpp"

namespace safeoco {

/// Monte-Carlo classification of box samples against the three nested sets:
/// shrunk (analysis construct), conservative (what the algorithm uses), true.
struct NestingReport {
  long long samples = 0;
  long long in_shrunk = 0;
  long long in_conservative = 0;
  long long in_true = 0;
  long long violations_shrunk_not_conservative = 0;
  long long violations_conservative_not_true = 0;
  /// The nesting guarantees are conditional on the confidence ellipsoids
  /// covering the true rows; the caller tags the report with that event.
  bool coverage_holds = false;
};

/// Samples n points uniformly in sample_box and classifies each against the
/// shrunk rows, the conservative set, and the true rows-plus-box.
NestingReport check_nesting(const TruePolytope& truth, const ConservativeSafeSet& conservative,
                            const ShrunkPolytope& shrunk, const AmbientSet& sample_box,
                            long long n_samples, Rng& rng);

struct EigminReport {
  double lambda_min = 0.0;
  double bound = 0.0;  // ridge + 0.5 gamma^2 sigma_zeta_sq t0
  bool holds = false;
};

/// Smallest eigenvalue of the Gram matrix against the exploration bound.
EigminReport check_eigmin(const MatrixRef& gram, double ridge, double gamma,
                          double sigma_zeta_sq, long long t0);

/// The two exploration-length thresholds (ceilinged):
///   chernoff: (8 L^2 / (gamma^2 sigma_zeta_sq)) log(d / delta)
///   theorem:  8 beta^2 L^2 / (gamma^2 sigma_zeta_sq safety_gap^2)
struct T0Bounds {
  long long chernoff = 0;
  long long theorem = 0;
};

T0Bounds check_t0_conditions(double norm_bound, double gamma, double sigma_zeta_sq, int d,
                             double delta, double beta, double safety_gap);

/// True when every true row sits in its confidence ellipsoid:
/// ||a_hat_i - a_i||_V <= beta for all i.
bool covers_truth(const RlsEstimate& est, double beta, const MatrixRef& truth);

/// Brute-force 2D projection: coarse grid argmin of ||x - z|| over feasible
/// points, then one refinement pass around the winner. Final resolution is
/// (bounds span) / (coarse_n * refine_n) per axis.
Vector grid_project_oracle(const std::function<bool(const Vector&)>& member, const VectorRef& z,
                           const AmbientSet& bounds, int coarse_n, int refine_n);

}  // namespace safeoco
