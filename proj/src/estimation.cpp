#include "safeoco/estimation.hpp"

#include <cmath>
#include <iostream>

#include "safeoco/errors.hpp"

namespace safeoco {

RlsEstimate fit_rls(const ExplorationLog& log, double ridge) {
  if (!(ridge > 0.0) || !std::isfinite(ridge))
    throw InvalidInputError("fit_rls: ridge must be positive and finite");
  if (log.steps() == 0) throw InvalidInputError("fit_rls: empty exploration log");
  if (log.observations.rows() != log.actions.rows())
    throw InvalidInputError("fit_rls: action/observation row counts differ");
  if (!log.actions.allFinite() || !log.observations.allFinite())
    throw InvalidInputError("fit_rls: non-finite log entries");

  const int d = log.dim();
  RlsEstimate est;
  est.ridge = ridge;
  est.gram = Matrix::Identity(d, d) * ridge;
  est.gram.selfadjointView<Eigen::Lower>().rankUpdate(log.actions.transpose());
  est.gram.triangularView<Eigen::StrictlyUpper>() = est.gram.transpose();

  Eigen::LLT<Matrix> llt(est.gram);
  if (llt.info() != Eigen::Success) {
    const double bump = 1e-12 * est.gram.trace() / d;
    est.gram.diagonal().array() += bump;
    est.jitter_applied = true;
    std::cerr << "fit_rls: Gram factorization needed diagonal jitter " << bump << "\n";
    llt.compute(est.gram);
    if (llt.info() != Eigen::Success)
      throw ConvergenceError("fit_rls: Gram matrix not positive definite after jitter");
  }
  est.gram_chol = llt.matrixL();

  // a_hat rows solve V a_i = X^T y(i); both triangular sweeps reuse the factor.
  const Matrix xty = log.actions.transpose() * log.observations;  // d x m
  est.a_hat = llt.solve(xty).transpose();
  return est;
}

double confidence_radius(double noise_r, int d, long long t0, double norm_bound,
                         double ridge, double delta, int m, double row_norm_bound) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInputError("confidence_radius: delta outside (0,1)");
  if (!(ridge > 0.0)) throw InvalidInputError("confidence_radius: ridge must be positive");
  if (t0 <= 0) throw InvalidInputError("confidence_radius: t0 must be positive");
  if (d <= 0 || m <= 0) throw InvalidInputError("confidence_radius: dimensions must be positive");
  if (noise_r < 0.0 || norm_bound < 0.0 || row_norm_bound < 0.0)
    throw InvalidInputError("confidence_radius: bounds must be nonnegative");

  const double arg =
      (1.0 + static_cast<double>(t0) * norm_bound * norm_bound / ridge) / (delta / m);
  return noise_r * std::sqrt(d * std::log(arg)) + std::sqrt(ridge) * row_norm_bound;
}

ConfidenceSpec ConfidenceSpec::make(double noise_r, int d, long long t0, double norm_bound,
                                    double ridge, double delta, int m, double row_norm_bound) {
  ConfidenceSpec spec{noise_r, d,     t0, norm_bound, ridge,
                      delta,   m,     row_norm_bound,
                      confidence_radius(noise_r, d, t0, norm_bound, ridge, delta, m, row_norm_bound)};
  return spec;
}

ConservativeSafeSet::ConservativeSafeSet(RlsEstimate estimate, double beta, Vector offsets,
                                         AmbientSet box)
    : estimate_(std::move(estimate)),
      beta_(beta),
      offsets_(std::move(offsets)),
      box_(std::move(box)) {
  if (beta_ < 0.0 || !std::isfinite(beta_))
    throw InvalidInputError("ConservativeSafeSet: beta must be nonnegative");
  if (offsets_.size() != estimate_.a_hat.rows())
    throw InvalidInputError("ConservativeSafeSet: offsets do not match estimate rows");
  if (box_.dim() != estimate_.a_hat.cols())
    throw InvalidInputError("ConservativeSafeSet: box dimension does not match estimate");
  const int d = box_.dim();
  gram_inv_ = estimate_.gram_chol.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  gram_inv_ = estimate_.gram_chol.transpose().triangularView<Eigen::Upper>().solve(gram_inv_);
}

double ConservativeSafeSet::weighted_norm(const VectorRef& x) const {
  return estimate_.gram_chol.triangularView<Eigen::Lower>().solve(x).norm();
}

Vector ConservativeSafeSet::constraint_values(const VectorRef& x) const {
  if (x.size() != dim()) throw InvalidInputError("constraint_values: dimension mismatch");
  Vector g = estimate_.a_hat * x - offsets_;
  if (beta_ > 0.0) g.array() += beta_ * weighted_norm(x);
  return g;
}

bool ConservativeSafeSet::contains(const VectorRef& x) const {
  if (!box_.contains(x)) return false;
  return (constraint_values(x).array() <= 0.0).all();
}

ConservativeSafeSet build_conservative_set(RlsEstimate estimate, double beta, Vector offsets,
                                           AmbientSet box) {
  return ConservativeSafeSet(std::move(estimate), beta, std::move(offsets), std::move(box));
}

Vector conservative_constraint_values(const ConservativeSafeSet& set, const VectorRef& x) {
  return set.constraint_values(x);
}

}  // namespace safeoco
