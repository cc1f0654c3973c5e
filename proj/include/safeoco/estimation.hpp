#pragma once

#include "safeoco/geometry.hpp"
#include "safeoco/types.hpp"

namespace safeoco {

/// Exploration-phase record: one action per row with its noisy constraint
/// observation y_t = A x_t + w_t.
struct ExplorationLog {
  Matrix actions;       // T0 x d
  Matrix observations;  // T0 x m

  long long steps() const { return actions.rows(); }
  int dim() const { return static_cast<int>(actions.cols()); }
  int obs_dim() const { return static_cast<int>(observations.cols()); }
};

/// Ridge least-squares estimate of the constraint matrix together with the
/// Gram matrix V = ridge*I + sum_t x_t x_t^T and its Cholesky factor.
struct RlsEstimate {
  Matrix a_hat;      // m x d
  Matrix gram;       // V, d x d
  Matrix gram_chol;  // lower triangular L with L L^T = V
  double ridge;
  bool jitter_applied = false;  // V needed a tiny diagonal bump to factor
};

/// Solves V a_hat_i = sum_t x_t y_t(i) per row through the Cholesky factor;
/// V is never inverted explicitly. A failed factorization gets one diagonal
/// jitter of 1e-12 * trace(V)/d (recorded on the estimate) before giving up.
RlsEstimate fit_rls(const ExplorationLog& log, double ridge);

/// Confidence radius
///   beta = R sqrt(d log((1 + T0 L^2 / ridge) / (delta/m))) + sqrt(ridge) L_A.
double confidence_radius(double noise_r, int d, long long t0, double norm_bound,
                         double ridge, double delta, int m, double row_norm_bound);

/// The inputs behind a confidence radius, kept so beta can be recomputed.
struct ConfidenceSpec {
  double noise_r;         // sub-Gaussian noise parameter R
  int d;                  // action dimension
  long long t0;           // exploration steps
  double norm_bound;      // L
  double ridge;           // regularization weight
  double delta;           // failure probability
  int m;                  // constraint rows
  double row_norm_bound;  // L_A
  double beta;

  static ConfidenceSpec make(double noise_r, int d, long long t0, double norm_bound,
                             double ridge, double delta, int m, double row_norm_bound);
};

/// Conservative safe set {x in X : a_hat_i^T x + beta ||x||_{V^-1} <= b_i}.
/// With beta = 0 it degenerates to the estimated polytope {A_hat x <= b} ∩ X.
class ConservativeSafeSet {
 public:
  ConservativeSafeSet(RlsEstimate estimate, double beta, Vector offsets, AmbientSet box);

  const RlsEstimate& estimate() const { return estimate_; }
  double beta() const { return beta_; }
  const Vector& offsets() const { return offsets_; }
  const AmbientSet& box() const { return box_; }
  int dim() const { return estimate_.a_hat.cols(); }
  int rows() const { return static_cast<int>(offsets_.size()); }

  /// Cached V^{-1}; used by solvers that need Hessians of the boundary.
  const Matrix& gram_inverse() const { return gram_inv_; }

  /// ||x||_{V^-1} through one triangular solve against the Cholesky factor.
  double weighted_norm(const VectorRef& x) const;

  /// g_i(x) = a_hat_i^T x + beta ||x||_{V^-1} - b_i.
  Vector constraint_values(const VectorRef& x) const;

  /// g(x) <= 0 (exact) and x inside the ambient box.
  bool contains(const VectorRef& x) const;

 private:
  RlsEstimate estimate_;
  double beta_;
  Vector offsets_;
  AmbientSet box_;
  Matrix gram_inv_;
};

ConservativeSafeSet build_conservative_set(RlsEstimate estimate, double beta, Vector offsets,
                                           AmbientSet box);

Vector conservative_constraint_values(const ConservativeSafeSet& set, const VectorRef& x);

}  // namespace safeoco
