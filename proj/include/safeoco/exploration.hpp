#pragma once

#include <cstdint>

#include "safeoco/geometry.hpp"
#include "safeoco/rng.hpp"

namespace safeoco {

/// Strictly feasible baseline action with its known constraint image
/// b^s = A x^s and the worst-case slack min_i (b_i - b^s_i).
struct BaselineSpec {
  Vector action;      // x^s
  Vector image;       // b^s
  double safety_gap;  // Delta^s > 0

  /// Validates that the image leaves a strictly positive gap to the offsets.
  BaselineSpec(Vector action_, Vector image_, const VectorRef& offsets);
};

struct ExplorationConfig {
  double gamma;                // mixing weight in [0, 1)
  double perturbation_radius;  // min(1, L)
  std::uint64_t rng_seed;
};

/// Gap rule gamma = min(safety_gap / row_norm_bound, 1 - 1e-9).
double compute_gamma(double safety_gap, double row_norm_bound);

/// Largest gamma for which every action (1-g) x^s + g zeta, ||zeta|| <= radius,
/// stays inside the ambient box.
double box_gamma_cap(const VectorRef& baseline, double radius, const AmbientSet& box);

/// Largest gamma for which the per-row worst case
/// (1-g) b^s_i + g * row_norm_bound * radius <= b_i holds for every row.
/// Tighter than safety_gap / row_norm_bound when some b^s_i < 0.
double row_gamma_cap(const VectorRef& image, const VectorRef& offsets, double row_norm_bound,
                     double radius);

/// Uniform draw on the sphere of the given radius (normalized Gaussian).
Vector sample_perturbation(Rng& rng, int dim, double radius);

/// x_t = (1 - gamma) * baseline + gamma * perturbation.
Vector exploration_action(const VectorRef& baseline, double gamma, const VectorRef& perturbation);

}  // namespace safeoco
