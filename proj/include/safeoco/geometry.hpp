#pragma once

#include <vector>

#include "safeoco/types.hpp"

namespace safeoco {

/// Linear safety constraints Ax <= b. The matrix is unknown to the learner;
/// only environment, hindsight and verification code paths may read it.
struct TruePolytope {
  Matrix A;  // m x d
  Vector b;  // m

  TruePolytope(Matrix A_, Vector b_);

  int rows() const { return static_cast<int>(A.rows()); }
  int dim() const { return static_cast<int>(A.cols()); }

  /// Largest constraint row norm; a valid L_A bound.
  double max_row_norm() const;
};

/// Known ambient box X = [lower, upper]^d together with the norm bound
/// L = max ||x||_2 over X (attained at a box corner).
struct AmbientSet {
  Vector lower;
  Vector upper;
  double norm_bound;  // L

  AmbientSet(Vector lower_, Vector upper_);
  AmbientSet(Vector lower_, Vector upper_, double norm_bound_);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const VectorRef& x) const;
};

/// The base polytope with every face pulled inward by a fixed margin:
/// {x : a_i^T x + margin <= b_i for all i}.
struct ShrunkPolytope {
  TruePolytope base;
  double margin;  // tau_in > 0

  ShrunkPolytope(TruePolytope base_, double margin_);
};

/// Exact membership in {Ax <= b} ∩ X; no tolerance is applied.
bool contains(const TruePolytope& p, const AmbientSet& box, const VectorRef& x);

/// Componentwise slack b - Ax; nonnegative iff Ax <= b.
Vector safety_margin(const TruePolytope& p, const VectorRef& x);

/// Exact membership in the shrunk polytope (rows only, no box).
bool shrunk_contains(const ShrunkPolytope& s, const VectorRef& x);

/// Vertices of {Ax <= b} ∩ X for d <= 3, deduplicated and sorted
/// lexicographically. Throws InvalidInputError for d > 3.
std::vector<Vector> enumerate_vertices(const TruePolytope& p, const AmbientSet& box);

}  // namespace safeoco
